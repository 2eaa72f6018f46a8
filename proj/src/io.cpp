#include "wm/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace wm {

namespace {

Vec vec_from(const Json& j, int expect = -1) {
  if (!j.is_array()) throw InvalidInput("expected a numeric array");
  const int n = static_cast<int>(j.size());
  if (n < 1 || n > kMaxPoseDim) throw InvalidInput("vector length out of range");
  if (expect >= 0 && n != expect)
    throw InvalidInput("expected a vector of length " + std::to_string(expect));
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = j.at(i).get<double>();
  return v;
}

Json vec_to(const Vec& v) {
  Json j = Json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Mat mat_from(const Json& j, int d) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) throw InvalidInput("expected a d x d matrix");
  Mat m(d, d);
  for (int r = 0; r < d; ++r) {
    if (!j[r].is_array() || static_cast<int>(j[r].size()) != d)
      throw InvalidInput("expected a d x d matrix");
    for (int c = 0; c < d; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Json mat_to(const Mat& m) {
  Json j = Json::array();
  for (int r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

std::vector<double> per_type(const Json& j, int a, const char* name) {
  if (j.is_number()) return std::vector<double>(a, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != a)
    throw InvalidInput(std::string(name) + " needs one entry per type");
  return j.get<std::vector<double>>();
}

}  // namespace

ModelConfig model_config_from_json(const Json& j) {
  try {
    ModelConfig cfg;
    cfg.alpha = j.at("alpha").get<double>();
    cfg.num_types = j.at("num_types").get<int>();
    cfg.pose_dim = j.at("pose_dim").get<int>();
    const int a = cfg.num_types;
    const int d = cfg.pose_dim;
    if (a < 1) throw InvalidInput("num_types must be >= 1");
    if (d < 1 || d > kMaxPoseDim) throw InvalidInput("pose_dim out of range");
    if (j.contains("type_prior")) {
      const auto tp = per_type(j.at("type_prior"), a, "type_prior");
      cfg.type_prior = Eigen::Map<const Eigen::VectorXd>(tp.data(), a);
    } else {
      cfg.type_prior = Eigen::VectorXd::Constant(a, 1.0 / a);
    }
    const Json& conf = j.at("confusion");
    if (!conf.is_array() || static_cast<int>(conf.size()) != a)
      throw InvalidInput("confusion must be A x A");
    cfg.confusion.resize(a, a);
    for (int r = 0; r < a; ++r) {
      if (!conf[r].is_array() || static_cast<int>(conf[r].size()) != a)
        throw InvalidInput("confusion must be A x A");
      for (int c = 0; c < a; ++c) cfg.confusion(r, c) = conf[r][c].get<double>();
    }
    cfg.sense_cov = mat_from(j.at("sense_cov"), d);
    const Json& tc = j.at("trans_cov");
    if (tc.is_array() && !tc.empty() && tc[0].is_array() && !tc[0].empty() && tc[0][0].is_array()) {
      if (static_cast<int>(tc.size()) != a) throw InvalidInput("trans_cov needs one matrix per type");
      for (const auto& m : tc) cfg.trans_cov.push_back(mat_from(m, d));
    } else {
      cfg.trans_cov.assign(a, mat_from(tc, d));
    }
    cfg.survival = per_type(j.at("survival"), a, "survival");
    cfg.p_fn = per_type(j.at("p_fn"), a, "p_fn");
    cfg.p_fp = j.at("p_fp").get<double>();
    if (j.contains("world_volume") && !j.at("world_volume").is_null())
      cfg.world_volume = j.at("world_volume").get<double>();
    cfg.validate();
    return cfg;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("model config: ") + e.what());
  }
}

Json model_config_to_json(const ModelConfig& cfg) {
  Json j;
  j["alpha"] = cfg.alpha;
  j["num_types"] = cfg.num_types;
  j["pose_dim"] = cfg.pose_dim;
  j["type_prior"] = std::vector<double>(cfg.type_prior.data(), cfg.type_prior.data() + cfg.num_types);
  Json conf = Json::array();
  for (int r = 0; r < cfg.num_types; ++r) {
    Json row = Json::array();
    for (int c = 0; c < cfg.num_types; ++c) row.push_back(cfg.confusion(r, c));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  j["sense_cov"] = mat_to(cfg.sense_cov);
  Json tc = Json::array();
  for (const auto& m : cfg.trans_cov) tc.push_back(mat_to(m));
  j["trans_cov"] = tc;
  j["survival"] = cfg.survival;
  j["p_fn"] = cfg.p_fn;
  j["p_fp"] = cfg.p_fp;
  if (cfg.world_volume) j["world_volume"] = *cfg.world_volume;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
}

ModelConfig load_model_config(const std::string& path) {
  return model_config_from_json(read_json_file(path));
}

SimConfig sim_config_from_json(const Json& j) {
  try {
    SimConfig s = j.contains("preset") ? sim_preset(j.at("preset").get<std::string>(), 0) : SimConfig{};
    if (j.contains("domain_min")) s.domain_min = vec_from(j.at("domain_min"));
    if (j.contains("domain_max")) s.domain_max = vec_from(j.at("domain_max"));
    if (s.domain_min.size() == 0) s.domain_min = Vec::Zero(2);
    if (s.domain_max.size() == 0) s.domain_max = Vec::Constant(2, 100.0);
    auto get = [&](const char* k, auto& field) {
      if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    get("num_epochs", s.num_epochs);
    get("views_per_epoch", s.views_per_epoch);
    get("min_view_fraction", s.min_view_fraction);
    get("fp_rate", s.fp_rate);
    get("p_miss", s.p_miss);
    get("num_types", s.num_types);
    get("confusion_correct", s.confusion_correct);
    get("location_noise_sd", s.location_noise_sd);
    get("velocity_noise_sd", s.velocity_noise_sd);
    get("step_sd", s.step_sd);
    get("survival", s.survival);
    get("num_objects", s.num_objects);
    get("min_objects", s.min_objects);
    get("max_objects", s.max_objects);
    get("seed", s.seed);
    if (j.contains("region_policy")) {
      const auto r = j.at("region_policy").get<std::string>();
      if (r == "full-domain") s.region_policy = RegionPolicy::FullDomain;
      else if (r == "random-sub-box") s.region_policy = RegionPolicy::RandomSubBox;
      else throw InvalidInput("unknown region_policy '" + r + "'");
    }
    if (j.contains("dynamics")) {
      const auto r = j.at("dynamics").get<std::string>();
      if (r == "velocity-walk") s.dynamics = DynamicsMode::VelocityWalk;
      else if (r == "location-walk") s.dynamics = DynamicsMode::LocationWalk;
      else throw InvalidInput("unknown dynamics '" + r + "'");
    }
    if (j.contains("birth_policy")) {
      const auto r = j.at("birth_policy").get<std::string>();
      if (r == "staggered") s.birth_policy = BirthPolicy::Staggered;
      else if (r == "replenish") s.birth_policy = BirthPolicy::Replenish;
      else throw InvalidInput("unknown birth_policy '" + r + "'");
    }
    s.validate();
    return s;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("sim config: ") + e.what());
  }
}

Json sim_config_to_json(const SimConfig& s) {
  Json j;
  j["domain_min"] = vec_to(s.domain_min);
  j["domain_max"] = vec_to(s.domain_max);
  j["num_epochs"] = s.num_epochs;
  j["views_per_epoch"] = s.views_per_epoch;
  j["region_policy"] = s.region_policy == RegionPolicy::FullDomain ? "full-domain" : "random-sub-box";
  j["min_view_fraction"] = s.min_view_fraction;
  j["fp_rate"] = s.fp_rate;
  j["p_miss"] = s.p_miss;
  j["num_types"] = s.num_types;
  j["confusion_correct"] = s.confusion_correct;
  j["location_noise_sd"] = s.location_noise_sd;
  j["dynamics"] = s.dynamics == DynamicsMode::VelocityWalk ? "velocity-walk" : "location-walk";
  j["velocity_noise_sd"] = s.velocity_noise_sd;
  j["step_sd"] = s.step_sd;
  j["survival"] = s.survival;
  j["birth_policy"] = s.birth_policy == BirthPolicy::Staggered ? "staggered" : "replenish";
  j["num_objects"] = s.num_objects;
  j["min_objects"] = s.min_objects;
  j["max_objects"] = s.max_objects;
  j["seed"] = s.seed;
  return j;
}

Dataset read_dataset_jsonl(std::istream& in) {
  std::vector<ViewFrame> views;
  std::string line;
  int line_no = 0;
  int dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    try {
      const Json j = Json::parse(line);
      ViewFrame v;
      v.epoch = j.at("epoch").get<int>();
      v.view_index = j.at("view").get<int>();
      if (v.epoch < 1 || v.view_index < 1) throw InvalidInput("epoch and view must be >= 1");
      v.region.min = vec_from(j.at("region").at("min"), dim ? dim : -1);
      if (!dim) dim = static_cast<int>(v.region.min.size());
      v.region.max = vec_from(j.at("region").at("max"), dim);
      for (const auto& det : j.at("detections")) {
        Observation o;
        o.type_obs = det.at("type").get<int>() - 1;
        if (o.type_obs < 0) throw InvalidInput("type ids are 1-based");
        o.pose = vec_from(det.at("pose"), dim);
        v.observations.push_back(std::move(o));
      }
      views.push_back(std::move(v));
    } catch (const Json::exception& e) {
      throw InvalidInput(where + e.what());
    } catch (const InvalidInput& e) {
      throw InvalidInput(where + e.what());
    }
  }
  return Dataset(std::move(views), dim);
}

void write_dataset_jsonl(std::ostream& out, const Dataset& data) {
  for (const auto& v : data.views()) {
    Json j;
    j["epoch"] = v.epoch;
    j["view"] = v.view_index;
    j["region"] = {{"min", vec_to(v.region.min)}, {"max", vec_to(v.region.max)}};
    Json dets = Json::array();
    for (const auto& o : v.observations) dets.push_back({{"type", o.type_obs + 1}, {"pose", vec_to(o.pose)}});
    j["detections"] = dets;
    out << j.dump() << '\n';
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_dataset_jsonl(in);
}

void write_assignments_jsonl(std::ostream& out, const Dataset& data, std::span<const TrackId> labels) {
  if (static_cast<int>(labels.size()) != data.num_obs())
    throw InvalidInput("label count does not match the dataset");
  for (int slot = 0; slot < data.num_views(); ++slot) {
    const auto& v = data.view(slot);
    const ObsId first = data.view_first_obs(slot);
    Json j;
    j["epoch"] = v.epoch;
    j["view"] = v.view_index;
    j["lambda"] = std::vector<TrackId>(labels.begin() + first, labels.begin() + first + data.view_size(slot));
    out << j.dump() << '\n';
  }
}

std::vector<TrackId> read_assignments_jsonl(std::istream& in, const Dataset& data) {
  std::map<std::pair<int, int>, int> slot_of;
  for (int s = 0; s < data.num_views(); ++s) slot_of[{data.view(s).epoch, data.view(s).view_index}] = s;
  std::vector<TrackId> labels(data.num_obs(), kUnassigned);
  std::vector<char> seen(data.num_views(), 0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "assignments line " + std::to_string(line_no) + ": ";
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw InvalidInput(where + e.what());
    }
    const auto key = std::make_pair(j.value("epoch", 0), j.value("view", 0));
    auto it = slot_of.find(key);
    if (it == slot_of.end())
      throw DataInconsistency(where + "no view " + std::to_string(key.second) + " in epoch " +
                              std::to_string(key.first));
    const int slot = it->second;
    if (seen[slot]) throw DataInconsistency(where + "duplicate record");
    seen[slot] = 1;
    const auto lambda = j.at("lambda").get<std::vector<TrackId>>();
    if (static_cast<int>(lambda.size()) != data.view_size(slot))
      throw DataInconsistency(where + "lambda length " + std::to_string(lambda.size()) +
                              " != detections " + std::to_string(data.view_size(slot)));
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      if (lambda[i] < 0) throw DataInconsistency(where + "negative label");
      labels[data.view_first_obs(slot) + static_cast<ObsId>(i)] = lambda[i];
    }
  }
  for (int s = 0; s < data.num_views(); ++s)
    if (!seen[s])
      throw DataInconsistency("assignments miss epoch " + std::to_string(data.view(s).epoch) +
                              " view " + std::to_string(data.view(s).view_index));
  return labels;
}

int TrackReport::argmax_type() const {
  int best = 0;
  for (int a = 1; a < static_cast<int>(type_pmf.size()); ++a)
    if (type_pmf[a] > type_pmf[best]) best = a;
  return best;
}

std::vector<TrackReport> track_reports(const WorldState& state) {
  std::vector<TrackReport> out;
  for (TrackId k : state.track_ids()) {
    const TrackFit& f = state.fit(k);
    TrackReport r;
    r.id = k;
    r.birth = f.birth;
    r.death = f.death;
    const Eigen::VectorXd pmf = f.type_posterior.pmf();
    r.type_pmf.assign(pmf.data(), pmf.data() + pmf.size());
    for (const auto& b : f.beliefs) r.epochs.push_back({b.epoch, b.count, b.smoothed.mean, b.smoothed.cov});
    out.push_back(std::move(r));
  }
  return out;
}

Json tracks_to_json(std::span<const TrackReport> tracks) {
  Json arr = Json::array();
  for (const auto& t : tracks) {
    Json j;
    j["id"] = t.id;
    j["birth"] = t.birth;
    j["death"] = t.death;
    j["type_pmf"] = t.type_pmf;
    Json eps = Json::array();
    for (const auto& e : t.epochs) {
      std::vector<double> cov;
      for (int r = 0; r < e.cov.rows(); ++r)
        for (int c = 0; c < e.cov.cols(); ++c) cov.push_back(e.cov(r, c));
      eps.push_back({{"epoch", e.epoch}, {"count", e.count}, {"mean", vec_to(e.mean)}, {"cov", cov}});
    }
    j["epochs"] = eps;
    arr.push_back(j);
  }
  return Json{{"tracks", arr}};
}

std::vector<TrackReport> tracks_from_json(const Json& j) {
  try {
    std::vector<TrackReport> out;
    for (const auto& t : j.at("tracks")) {
      TrackReport r;
      r.id = t.at("id").get<TrackId>();
      r.birth = t.at("birth").get<int>();
      r.death = t.at("death").get<int>();
      r.type_pmf = t.at("type_pmf").get<std::vector<double>>();
      for (const auto& e : t.at("epochs")) {
        EpochBeliefReport b;
        b.epoch = e.at("epoch").get<int>();
        b.count = e.at("count").get<int>();
        b.mean = vec_from(e.at("mean"));
        const int d = static_cast<int>(b.mean.size());
        const auto cov = e.at("cov").get<std::vector<double>>();
        if (static_cast<int>(cov.size()) != d * d) throw InvalidInput("cov must hold d*d entries");
        b.cov.resize(d, d);
        for (int rr = 0; rr < d; ++rr)
          for (int c = 0; c < d; ++c) b.cov(rr, c) = cov[rr * d + c];
        r.epochs.push_back(std::move(b));
      }
      out.push_back(std::move(r));
    }
    return out;
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("tracks file: ") + e.what());
  }
}

Json truth_to_json(const GroundTruth& truth, const Dataset& data) {
  Json objs = Json::array();
  for (const auto& o : truth.objects) {
    Json poses = Json::array();
    for (const auto& [t, x] : o.pose) poses.push_back({{"epoch", t}, {"pose", vec_to(x)}});
    objs.push_back({{"id", o.id}, {"type", o.type + 1}, {"birth", o.birth}, {"death", o.death}, {"poses", poses}});
  }
  Json views = Json::array();
  for (int s = 0; s < data.num_views(); ++s)
    views.push_back({{"epoch", data.view(s).epoch}, {"view", data.view(s).view_index}, {"sources", truth.sources[s]}});
  return Json{{"objects", objs}, {"views", views}};
}

GroundTruth truth_from_json(const Json& j, const Dataset& data) {
  GroundTruth g;
  try {
    for (const auto& o : j.at("objects")) {
      TrueObject obj;
      obj.id = o.at("id").get<int>();
      obj.type = o.at("type").get<int>() - 1;
      obj.birth = o.at("birth").get<int>();
      obj.death = o.at("death").get<int>();
      for (const auto& p : o.at("poses")) obj.pose[p.at("epoch").get<int>()] = vec_from(p.at("pose"));
      g.objects.push_back(std::move(obj));
    }
    std::map<std::pair<int, int>, std::vector<int>> by_view;
    for (const auto& v : j.at("views"))
      by_view[{v.at("epoch").get<int>(), v.at("view").get<int>()}] = v.at("sources").get<std::vector<int>>();
    for (int s = 0; s < data.num_views(); ++s) {
      auto it = by_view.find({data.view(s).epoch, data.view(s).view_index});
      if (it == by_view.end() || static_cast<int>(it->second.size()) != data.view_size(s))
        throw DataInconsistency("truth does not match dataset at epoch " +
                                std::to_string(data.view(s).epoch) + " view " +
                                std::to_string(data.view(s).view_index));
      g.sources.push_back(it->second);
    }
  } catch (const Json::exception& e) {
    throw InvalidInput(std::string("truth file: ") + e.what());
  }
  return g;
}

}  // namespace wm
