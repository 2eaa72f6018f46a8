#include "wm/pipeline.hpp"

#include "wm/metrics.hpp"

#include <exception>
#include <thread>

namespace wm {

void validate(const InferOptions& opt) {
  if (opt.algo != "gibbs" && opt.algo != "icm" && opt.algo != "mcmcda" && opt.algo != "icm-mcmc")
    throw InvalidInput("unknown algorithm '" + opt.algo + "'");
  if (opt.sweeps < 0) throw InvalidInput("--sweeps must be >= 0");
  if (opt.samples < 0) throw InvalidInput("--samples must be >= 0");
  if (opt.chains < 1) throw InvalidInput("--chains must be >= 1");
}

namespace {

InferResult run_chain(const Dataset& data, const ModelConfig& cfg, const InferOptions& opt,
                      int chain) {
  InferResult r;
  r.algo = opt.algo;
  r.chain = chain;
  r.seed = opt.seed + static_cast<std::uint64_t>(chain);
  if (opt.algo == "gibbs") {
    const int sweeps = opt.sweeps > 0 ? opt.sweeps : 100;
    GibbsResult g = run_gibbs(data, cfg, sweeps, r.seed, opt.gibbs);
    r.labels = std::move(g.best_labels);
    r.trace = std::move(g.trace);
  } else if (opt.algo == "icm") {
    IcmOptions io = opt.icm;
    if (opt.sweeps > 0) io.max_sweeps = opt.sweeps;
    WorldState st(data, cfg);
    reset_inactive(st);
    IcmResult res = icm_until_convergence(st, io);
    r.labels = st.labels();
    r.trace = std::move(res.trace);
  } else if (opt.algo == "mcmcda") {
    McmcdaResult m = run_mcmcda(data, cfg, opt.samples > 0 ? opt.samples : 100000, r.seed, opt.mcmcda);
    r.labels = std::move(m.map_labels);
    r.trace = std::move(m.trace);
  } else {
    IcmOptions io = opt.icm;
    if (opt.sweeps > 0) io.max_sweeps = opt.sweeps;
    TwoStageResult ts = two_stage(data, cfg, opt.samples > 0 ? opt.samples : 10000, r.seed,
                                  opt.mcmcda, io);
    r.labels = std::move(ts.labels);
    r.trace = std::move(ts.stage3.trace);
  }
  r.iterations = static_cast<long>(r.trace.size());
  r.score = global_log_score(state_from_labels(data, cfg, r.labels));
  return r;
}

}  // namespace

InferResult infer(const Dataset& data, const ModelConfig& cfg, const InferOptions& opt) {
  validate(opt);
  if (opt.chains == 1) return run_chain(data, cfg, opt, 0);
  std::vector<InferResult> results(opt.chains);
  std::vector<std::exception_ptr> errors(opt.chains);
  {
    std::vector<std::jthread> threads;
    for (int c = 0; c < opt.chains; ++c)
      threads.emplace_back([&, c] {
        try {
          results[c] = run_chain(data, cfg, opt, c);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::size_t best = 0;
  for (std::size_t c = 1; c < results.size(); ++c)
    if (results[c].score > results[best].score) best = c;
  return std::move(results[best]);
}

Json accuracy_json(const Dataset& data, std::span<const TrackId> labels, const GroundTruth& truth) {
  const std::vector<int> t = truth.labels();
  const AccuracyReport a = accuracy(data, labels, t);
  auto pc = [](const PairCounts& p) {
    return Json{{"precision", p.precision()}, {"recall", p.recall()}, {"f1", p.f1()}};
  };
  Json per = Json::array();
  for (std::size_t e = 0; e < a.per_epoch.size(); ++e) {
    Json j = pc(a.per_epoch[e]);
    j["epoch"] = static_cast<int>(e) + 1;
    j["count_error"] = a.count_error[e];
    per.push_back(j);
  }
  Json out = pc(a.pooled);
  out["per_epoch"] = per;
  return out;
}

Json run_report(const InferResult& r, const Dataset& data,
                const GroundTruth* truth, std::optional<double> wall_seconds) {
  Json j;
  j["algorithm"] = r.algo;
  j["seed"] = r.seed;
  j["chain"] = r.chain;
  if (wall_seconds) j["wall_time_s"] = *wall_seconds;
  j["map_log_score"] = r.score;
  j["iterations"] = r.iterations;
  j["trace"] = r.trace;
  j["tracks_per_epoch"] = labels_per_epoch(data, r.labels);
  if (truth) j["accuracy"] = accuracy_json(data, r.labels, *truth);
  return j;
}

}  // namespace wm
