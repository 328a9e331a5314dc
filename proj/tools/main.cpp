// deepspark: multi-command driver for the exchanger, workers, data tooling,
// the simulator, and the speed-up analyzer.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <sys/prctl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "deepspark/client.hpp"
#include "deepspark/dataset.hpp"
#include "deepspark/errors.hpp"
#include "deepspark/exchanger.hpp"
#include "deepspark/log.hpp"
#include "deepspark/manifest.hpp"
#include "deepspark/metrics.hpp"
#include "deepspark/model.hpp"
#include "deepspark/rng.hpp"
#include "deepspark/simulator.hpp"
#include "deepspark/speedup.hpp"
#include "deepspark/worker.hpp"

namespace fs = std::filesystem;
using namespace deepspark;
using nlohmann::json;

namespace {

// Seed-stream tags so one --seed drives every derived stream.
constexpr uint64_t kTagData = 0x44415441;      // synthetic generation
constexpr uint64_t kTagHoldout = 0x484f4c44;
constexpr uint64_t kTagPartition = 0x50415254;
constexpr uint64_t kTagInit = 0x494e4954;      // master init
constexpr uint64_t kTagSchedule = 0x53434544;
constexpr uint64_t kTagWorker = 0x574b5253;    // per-worker streams

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted.store(true); }

void install_signal_handlers() {
  struct sigaction sa{};
  sa.sa_handler = on_signal;
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

fs::path resolve_out_dir(std::string flag) {
  if (flag.empty()) flag = "runs/" + timestamp_compact();
  fs::path p(flag);
  fs::create_directories(p);
  return p;
}

// Hyperparameter flags shared by worker, simulate, and launch-local.
struct HyperFlags {
  double eta = 0.05;
  double alpha = 0.1;
  uint32_t tau = 100;
  bool adaptive = false;
  double loss_cut = 0.0;  // <= 0: resolve from the first batch
  uint32_t batch = 32;
  uint64_t iters = 1000;
  double weight_decay = 0.0;
};

void add_hyper_flags(CLI::App* cmd, HyperFlags& h) {
  auto* tau = cmd->add_option("--tau", h.tau, "Exchange every tau iterations (fixed period)")
                  ->capture_default_str();
  cmd->add_flag("--adaptive", h.adaptive,
                "Exchange when cumulated loss exceeds the threshold instead of every tau")
      ->excludes(tau);
  cmd->add_option("--loss-cut", h.loss_cut,
                  "Adaptive threshold; defaults to 20x the first-batch loss");
  cmd->add_option("--eta", h.eta, "Learning rate")->capture_default_str();
  cmd->add_option("--alpha", h.alpha, "Elastic moving rate, in (0,1)")->capture_default_str();
  cmd->add_option("--batch", h.batch, "Minibatch size")->capture_default_str();
  cmd->add_option("--iters", h.iters, "Local iterations per worker (i_max)")
      ->capture_default_str();
  cmd->add_option("--weight-decay", h.weight_decay, "Optional L2 coefficient")
      ->capture_default_str();
}

Hyperparams to_hyperparams(const HyperFlags& h) {
  Hyperparams hp;
  hp.eta = h.eta;
  hp.alpha = h.alpha;
  hp.tau = h.tau;
  hp.batch_size = h.batch;
  hp.i_max = h.iters;
  hp.weight_decay = h.weight_decay;
  hp.period_mode = h.adaptive ? PeriodMode::Adaptive : PeriodMode::Fixed;
  hp.loss_cut = h.loss_cut;
  return hp;
}

json hyper_json(const HyperFlags& h) {
  return json{{"eta", h.eta},
              {"alpha", h.alpha},
              {"period", h.adaptive ? json("adaptive") : json(h.tau)},
              {"loss_cut", h.loss_cut},
              {"batch", h.batch},
              {"iters", h.iters},
              {"weight_decay", h.weight_decay}};
}

// Synthetic-dataset flags shared by data gen, simulate, launch-local.
struct DataFlags {
  std::string csv_path;  // when set, load instead of generating
  uint32_t samples = 2000;
  uint32_t features = 20;
  uint32_t classes = 2;
  double separation = 10.0;
  double sigma = 0.5;
};

void add_data_flags(CLI::App* cmd, DataFlags& d) {
  auto* file = cmd->add_option("--data", d.csv_path, "CSV dataset to load (label,f1,...,fk)");
  cmd->add_option("--samples", d.samples, "Synthetic sample count")
      ->capture_default_str()
      ->excludes(file);
  cmd->add_option("--features", d.features, "Synthetic feature count")
      ->capture_default_str()
      ->excludes(file);
  cmd->add_option("--classes", d.classes, "Synthetic class count")
      ->capture_default_str()
      ->excludes(file);
  cmd->add_option("--separation", d.separation, "Minimum centroid separation")
      ->capture_default_str()
      ->excludes(file);
  cmd->add_option("--sigma", d.sigma, "Per-feature noise sigma")
      ->capture_default_str()
      ->excludes(file);
}

Dataset resolve_dataset(const DataFlags& d, uint64_t gen_seed, json& cfg) {
  if (!d.csv_path.empty()) {
    cfg["data"] = d.csv_path;
    return load_csv(d.csv_path);
  }
  SyntheticSpec spec;
  spec.n_samples = d.samples;
  spec.n_features = d.features;
  spec.n_classes = d.classes;
  spec.class_separation = d.separation;
  spec.noise_sigma = d.sigma;
  spec.seed = gen_seed;
  cfg["data"] = {{"synthetic",
                  {{"samples", spec.n_samples},
                   {"features", spec.n_features},
                   {"classes", spec.n_classes},
                   {"separation", spec.class_separation},
                   {"sigma", spec.noise_sigma},
                   {"seed", spec.seed}}}};
  return gen_synthetic(spec);
}

Model resolve_model(const std::string& flag, const Dataset& ds) {
  if (!flag.empty()) return Model::parse(flag);
  return Model::softmax(ds.n_features, ds.n_classes);
}

// --- subcommand bodies -------------------------------------------------------

int run_exchanger(const std::string& bind, uint32_t pool, double alpha, const std::string& mode,
                  const std::string& model_text, uint64_t seed, int idle_ms,
                  const std::string& port_file, const std::string& out_flag) {
  ExchangerConfig cfg;
  cfg.bind_address = bind;
  cfg.pool_size = pool;
  cfg.alpha = static_cast<float>(alpha);
  cfg.mode = parse_update_mode(mode);
  cfg.model = Model::parse(model_text);
  cfg.init_seed = seed;
  cfg.idle_timeout_ms = idle_ms;
  cfg.validate();

  ExchangerService service(std::move(cfg));
  std::cout << "listening on port " << service.port() << std::endl;
  if (!port_file.empty()) {
    std::ofstream pf(port_file, std::ios::trunc);
    pf << service.port() << '\n';
  }
  if (!out_flag.empty()) {
    const fs::path out = resolve_out_dir(out_flag);
    json cfg_json{{"bind", bind},          {"pool_size", pool}, {"alpha", alpha},
                  {"mode", mode},          {"model", model_text}, {"seed", seed},
                  {"idle_timeout_ms", idle_ms}};
    write_manifest(make_manifest("exchanger", cfg_json, {}), (out / "manifest.json").string());
  }

  install_signal_handlers();
  while (!g_interrupted.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  std::cout << "shutting down" << std::endl;
  return 0;
}

int run_worker_cmd(const std::string& connect, const std::string& shard_path,
                   const std::string& model_text, uint32_t id, uint64_t seed, const HyperFlags& h,
                   const std::string& out_flag) {
  const fs::path out = resolve_out_dir(out_flag);
  WorkerConfig cfg;
  cfg.exchanger_address = connect;
  cfg.shard_path = shard_path;
  cfg.hyper = to_hyperparams(h);
  cfg.worker_id = id;
  cfg.rng_seed = seed;
  cfg.metrics_path = (out / ("worker_" + std::to_string(id) + ".csv")).string();
  if (!model_text.empty()) cfg.model = Model::parse(model_text);

  json cfg_json{{"connect", connect}, {"shard", shard_path},
                {"model", model_text.empty() ? "auto" : model_text},
                {"worker_id", id},    {"seed", seed},
                {"hyper", hyper_json(h)}};
  write_manifest(make_manifest("worker", cfg_json, {cfg.metrics_path}),
                 (out / ("worker_" + std::to_string(id) + "_manifest.json")).string());

  const LocalRunResult res = run_worker(cfg);
  std::cout << "worker " << id << " done: " << res.log.size() << " iterations, final batch loss "
            << res.log.back().batch_loss << std::endl;
  return 0;
}

int run_data_gen(const DataFlags& d, uint64_t seed, const std::string& name,
                 const std::string& out_flag) {
  const fs::path out = resolve_out_dir(out_flag);
  json cfg;
  const Dataset ds = resolve_dataset(d, seed, cfg);
  const fs::path path = out / name;
  write_csv(ds, path.string());
  cfg["seed"] = seed;
  write_manifest(make_manifest("data gen", cfg, {path.string()}),
                 (out / "manifest.json").string());
  std::cout << path.string() << std::endl;
  return 0;
}

int run_data_partition(const std::string& in, uint32_t n, uint64_t seed,
                       const std::string& out_flag) {
  const fs::path out = resolve_out_dir(out_flag);
  const Dataset ds = load_csv(in);
  const std::vector<Dataset> shards = partition(ds, n, seed);
  std::vector<std::string> paths;
  for (uint32_t k = 0; k < n; ++k) {
    paths.push_back(spill_shard(shards[k], seed, out.string(), k));
  }
  write_manifest(
      make_manifest("data partition", json{{"in", in}, {"n", n}, {"seed", seed}}, paths),
      (out / "manifest.json").string());
  for (const auto& p : paths) std::cout << p << std::endl;
  return 0;
}

int run_data_spill(const std::string& in, uint32_t id, uint64_t seed,
                   const std::string& out_flag) {
  const fs::path out = resolve_out_dir(out_flag);
  const Dataset ds = load_csv(in);
  const std::string path = spill_shard(ds, seed, out.string(), id);
  write_manifest(make_manifest("data spill", json{{"in", in}, {"id", id}, {"seed", seed}},
                               {path}),
                 (out / "manifest.json").string());
  std::cout << path << std::endl;
  return 0;
}

int run_stats(const std::string& connect) {
  ExchangerClient client(parse_hostport(connect));
  const wire::StatsMsg s = client.stats();
  std::cout << "exchange_count=" << s.exchange_count << "\nqueue_depth=" << s.queue_depth
            << "\nuptime_ms=" << s.uptime_ms << std::endl;
  return 0;
}

std::string period_text(const HyperFlags& h) {
  return h.adaptive ? std::string("adaptive") : std::to_string(h.tau);
}

int run_simulate(uint32_t n, const std::string& mode_text, const std::string& model_text,
                 const DataFlags& d, const HyperFlags& h, double cost_c, double cost_s,
                 uint32_t eval_every, double holdout, uint64_t seed,
                 const std::vector<double>& multipliers, bool replicate, double target_acc,
                 uint64_t baseline_n, const std::string& out_flag) {
  const fs::path out = resolve_out_dir(out_flag);

  SimConfig cfg;
  json cfg_json;
  cfg.dataset = resolve_dataset(d, mix_seed(seed, kTagData), cfg_json);
  cfg.model = resolve_model(model_text, cfg.dataset);
  cfg.n_workers = n;
  cfg.hyper = to_hyperparams(h);
  if (mode_text == "async") {
    cfg.mode = SimMode::AsyncEASGD;
  } else if (mode_text == "sync") {
    cfg.mode = SimMode::Synchronous;
  } else {
    throw ContractError("--mode must be async or sync");
  }
  cfg.batch_cost_C = cost_c;
  cfg.comm_cost_S = cost_s;
  cfg.cost_multipliers = multipliers;
  cfg.eval_every = eval_every;
  cfg.holdout_frac = holdout;
  cfg.replicate_shards = replicate;
  cfg.schedule_seed = mix_seed(seed, kTagSchedule);
  cfg.init_seed = mix_seed(seed, kTagInit);
  cfg.data_seed = mix_seed(seed, kTagPartition);

  cfg_json["n"] = n;
  cfg_json["mode"] = mode_text;
  cfg_json["model"] = cfg.model.to_string();
  cfg_json["hyper"] = hyper_json(h);
  cfg_json["batch_cost_C"] = cost_c;
  cfg_json["comm_cost_S"] = cost_s;
  cfg_json["eval_every"] = eval_every;
  cfg_json["holdout"] = holdout;
  cfg_json["replicate"] = replicate;
  cfg_json["seed"] = seed;
  cfg_json["target_acc"] = target_acc;
  if (baseline_n > 0) cfg_json["baseline_n"] = baseline_n;

  std::vector<std::string> artifacts = {(out / "sim_summary.csv").string(),
                                        (out / "eval_curve.csv").string(),
                                        (out / "master.params").string()};
  for (uint32_t k = 0; k < n; ++k) {
    artifacts.push_back((out / ("worker_" + std::to_string(k) + ".csv")).string());
  }
  write_manifest(make_manifest("simulate", cfg_json, artifacts),
                 (out / "manifest.json").string());

  const SimResult res = simulate(cfg);

  for (uint32_t k = 0; k < n; ++k) {
    write_train_log(res.worker_logs[k],
                    (out / ("worker_" + std::to_string(k) + ".csv")).string());
  }
  save_params(res.final_master, (out / "master.params").string());
  {
    std::ofstream ec((out / "eval_curve.csv").string(), std::ios::trunc);
    ec << "virtual_time,per_worker_iter,accuracy\n";
    for (const EvalPoint& p : res.eval_curve) {
      ec << format_double(p.virtual_time) << ',' << p.per_worker_iter << ','
         << format_double(p.accuracy) << '\n';
    }
  }

  const auto n_a = iterations_to_accuracy(res, target_acc);
  std::string d_text;
  if (n_a && baseline_n > 0) d_text = format_sig6(estimate_d(res, baseline_n, target_acc));
  {
    std::ofstream sum((out / "sim_summary.csv").string(), std::ios::trunc);
    sum << "n,period,alpha,S,C,N_a,d_estimate,seed\n";
    sum << n << ',' << period_text(h) << ',' << format_double(h.alpha) << ','
        << format_double(cost_s) << ',' << format_double(cost_c) << ','
        << (n_a ? std::to_string(*n_a) : std::string()) << ',' << d_text << ',' << seed << '\n';
  }

  std::cout << "virtual_time=" << format_double(res.virtual_clock_total)
            << "\nfinal_accuracy=" << format_double(res.eval_curve.back().accuracy)
            << "\nN_a=" << (n_a ? std::to_string(*n_a) : std::string("not_reached"));
  if (!d_text.empty()) std::cout << "\nd_estimate=" << d_text;
  std::cout << std::endl;
  return 0;
}

int run_analyze_speedup(uint64_t n_a, double c, double s, double s_over_c, uint32_t n,
                        uint32_t tau, double d, double a, const std::string& out_flag) {
  SpeedupInputs inp;
  inp.N_a = n_a;
  inp.C = c;
  inp.S = s_over_c > 0.0 ? s_over_c * c : s;
  inp.n = n;
  inp.tau = tau;
  inp.d = d;
  inp.a = a;
  const Times t = times(inp);
  const double sp = speedup(inp);
  const double limit = speedup_large_tau(n, d);
  std::cout << "n=" << n << " tau=" << tau << " d=" << format_sig6(d)
            << " S=" << format_sig6(inp.S) << " C=" << format_sig6(c) << " N_a=" << n_a
            << "\nt_comp=" << format_sig6(t.t_comp) << "\nt_comm=" << format_sig6(t.t_comm)
            << "\nspeedup=" << format_sig6(sp) << "\nlarge_tau_limit=" << format_sig6(limit)
            << std::endl;
  if (!out_flag.empty()) {
    const fs::path out = resolve_out_dir(out_flag);
    const fs::path csv = out / "speedup.csv";
    std::ofstream f(csv.string(), std::ios::trunc);
    f << "n,tau,d,s,c,n_a,t_comp,t_comm,speedup,large_tau_limit\n";
    f << n << ',' << tau << ',' << format_sig6(d) << ',' << format_sig6(inp.S) << ','
      << format_sig6(c) << ',' << n_a << ',' << format_sig6(t.t_comp) << ','
      << format_sig6(t.t_comm) << ',' << format_sig6(sp) << ',' << format_sig6(limit) << '\n';
    json cfg{{"n_a", n_a}, {"c", c},     {"s", inp.S}, {"n", n},
             {"tau", tau}, {"d", d},     {"a", a}};
    write_manifest(make_manifest("analyze speedup", cfg, {csv.string()}),
                   (out / "manifest.json").string());
  }
  return 0;
}

int run_analyze_sweep(uint64_t n_a, double c, double s, double s_over_c, uint32_t n, uint32_t tau,
                      double d, double a, const std::string& vary,
                      const std::vector<double>& values, const std::string& out_flag) {
  SpeedupInputs base;
  base.N_a = n_a;
  base.C = c;
  base.S = s_over_c > 0.0 ? s_over_c * c : s;
  base.n = n;
  base.tau = tau;
  base.d = d;
  base.a = a;
  const std::vector<SweepRow> rows = sweep(base, vary, values);

  const fs::path out = resolve_out_dir(out_flag);
  const fs::path csv = out / "sweep.csv";
  write_sweep_csv(rows, vary, csv.string());
  json cfg{{"n_a", n_a}, {"c", c},   {"s", base.S},   {"n", n},
           {"tau", tau}, {"d", d},   {"a", a},        {"vary", vary},
           {"values", values}};
  write_manifest(make_manifest("analyze sweep", cfg, {csv.string()}),
                 (out / "manifest.json").string());

  std::cout << "vary,value,t_comp,t_comm,speedup\n";
  for (const SweepRow& r : rows) {
    std::cout << vary << ',' << format_sig6(r.value) << ',' << format_sig6(r.t_comp) << ','
              << format_sig6(r.t_comm) << ',' << format_sig6(r.speedup) << '\n';
  }
  std::cout << csv.string() << std::endl;
  return 0;
}

int run_launch_local(uint32_t n, const std::string& model_text, const DataFlags& d,
                     const HyperFlags& h, uint32_t pool, const std::string& mode, double holdout,
                     uint64_t seed, const std::string& out_flag) {
  const fs::path out = resolve_out_dir(out_flag);

  json cfg_json;
  const Dataset full = resolve_dataset(d, mix_seed(seed, kTagData), cfg_json);
  const Model model = resolve_model(model_text, full);
  auto [train, eval_set] = split_holdout(full, holdout, mix_seed(seed, kTagHoldout));
  const std::vector<Dataset> shards = partition(train, n, mix_seed(seed, kTagPartition));

  const fs::path shard_dir = out / "shards";
  std::vector<std::string> shard_paths;
  for (uint32_t k = 0; k < n; ++k) {
    shard_paths.push_back(spill_shard(shards[k], seed, shard_dir.string(), k));
  }

  cfg_json["n"] = n;
  cfg_json["model"] = model.to_string();
  cfg_json["hyper"] = hyper_json(h);
  cfg_json["pool_size"] = pool;
  cfg_json["mode"] = mode;
  cfg_json["holdout"] = holdout;
  cfg_json["seed"] = seed;
  std::vector<std::string> artifacts = shard_paths;
  artifacts.push_back((out / "master.params").string());
  artifacts.push_back((out / "summary.json").string());
  for (uint32_t k = 0; k < n; ++k) {
    artifacts.push_back((out / ("worker_" + std::to_string(k) + ".csv")).string());
  }
  write_manifest(make_manifest("launch-local", cfg_json, artifacts),
                 (out / "manifest.json").string());

  ExchangerConfig ecfg;
  ecfg.bind_address = "127.0.0.1:0";
  ecfg.pool_size = std::max(pool, n);
  ecfg.alpha = static_cast<float>(h.alpha);
  ecfg.mode = parse_update_mode(mode);
  ecfg.model = model;
  ecfg.init_seed = mix_seed(seed, kTagInit);
  ExchangerService service(std::move(ecfg));

  // Child argv blocks are fully built before forking; the child only execs.
  const std::string connect = "127.0.0.1:" + std::to_string(service.port());
  std::vector<std::vector<std::string>> child_args(n);
  for (uint32_t k = 0; k < n; ++k) {
    auto& a = child_args[k];
    a = {"/proc/self/exe", "worker",
         "--connect",      connect,
         "--shard",        shard_paths[k],
         "--id",           std::to_string(k),
         "--seed",         std::to_string(mix_seed(mix_seed(seed, kTagWorker), k)),
         "--eta",          format_double(h.eta),
         "--alpha",        format_double(h.alpha),
         "--batch",        std::to_string(h.batch),
         "--iters",        std::to_string(h.iters),
         "--weight-decay", format_double(h.weight_decay),
         "--out",          out.string()};
    if (!model_text.empty()) {
      a.push_back("--model");
      a.push_back(model.to_string());
    }
    if (h.adaptive) {
      a.push_back("--adaptive");
      if (h.loss_cut > 0.0) {
        a.push_back("--loss-cut");
        a.push_back(format_double(h.loss_cut));
      }
    } else {
      a.push_back("--tau");
      a.push_back(std::to_string(h.tau));
    }
  }
  std::vector<std::vector<char*>> child_argv(n);
  for (uint32_t k = 0; k < n; ++k) {
    for (auto& s : child_args[k]) child_argv[k].push_back(s.data());
    child_argv[k].push_back(nullptr);
  }

  std::vector<pid_t> pids(n, -1);
  for (uint32_t k = 0; k < n; ++k) {
    const pid_t pid = fork();
    if (pid < 0) {
      for (uint32_t j = 0; j < k; ++j) kill(pids[j], SIGTERM);
      throw NetError("fork failed");
    }
    if (pid == 0) {
      prctl(PR_SET_PDEATHSIG, SIGTERM);
      execv("/proc/self/exe", child_argv[k].data());
      _exit(127);
    }
    pids[k] = pid;
  }
  DS_LOG_INFO << "launched " << n << " workers against " << connect;

  bool failed = false;
  for (uint32_t k = 0; k < n; ++k) {
    int status = 0;
    if (waitpid(pids[k], &status, 0) < 0 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      std::cerr << "worker " << k << " failed"
                << (WIFEXITED(status) ? " with exit code " + std::to_string(WEXITSTATUS(status))
                                      : " abnormally")
                << std::endl;
      failed = true;
      for (uint32_t j = k + 1; j < n; ++j) kill(pids[j], SIGTERM);
    }
  }

  const ParamVector master = service.master().snapshot();
  const uint64_t exchanges = service.master().exchange_count();
  service.stop();
  if (failed) throw NetError("one or more workers failed");

  save_params(master, (out / "master.params").string());
  const double acc = accuracy(model, master, eval_set);
  json summary{{"n", n},
               {"exchange_count", exchanges},
               {"holdout_accuracy", acc},
               {"holdout_samples", eval_set.size()},
               {"master_params", (out / "master.params").string()}};
  std::ofstream sf((out / "summary.json").string(), std::ios::trunc);
  sf << summary.dump(2) << '\n';
  sf.flush();

  std::cout << "exchange_count=" << exchanges << "\nholdout_accuracy=" << format_double(acc)
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deepspark: asynchronous elastic-averaging SGD toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  // exchanger
  auto* ex = app.add_subcommand("exchanger", "Serve the master parameter vector over TCP");
  std::string ex_bind = "127.0.0.1:7878", ex_mode = "locked", ex_model, ex_port_file, ex_out;
  uint32_t ex_pool = 8;
  double ex_alpha = 0.1;
  uint64_t ex_seed = 0;
  int ex_idle = 30000;
  ex->add_option("--bind", ex_bind, "host:port to listen on (port 0 = ephemeral)")
      ->capture_default_str();
  ex->add_option("--pool-size", ex_pool, "Concurrent handler threads")->capture_default_str();
  ex->add_option("--alpha", ex_alpha, "Elastic moving rate")->capture_default_str();
  ex->add_option("--mode", ex_mode, "locked | lockfree")->capture_default_str();
  ex->add_option("--model", ex_model, "softmax:<f>:<c> or mlp:<f>:<h1,...>:<c>")->required();
  ex->add_option("--seed", ex_seed, "Master init seed")->capture_default_str();
  ex->add_option("--idle-timeout-ms", ex_idle, "Drop idle connections after this long")
      ->capture_default_str();
  ex->add_option("--port-file", ex_port_file, "Write the bound port to this file");
  ex->add_option("--out", ex_out, "Directory for the run manifest");
  ex->callback([&] {
    rc = run_exchanger(ex_bind, ex_pool, ex_alpha, ex_mode, ex_model, ex_seed, ex_idle,
                       ex_port_file, ex_out);
  });

  // worker
  auto* wk = app.add_subcommand("worker", "Train against a running exchanger");
  std::string wk_connect, wk_shard, wk_model, wk_out;
  uint32_t wk_id = 0;
  uint64_t wk_seed = 0;
  HyperFlags wk_h;
  wk->add_option("--connect", wk_connect, "Exchanger host:port")->required();
  wk->add_option("--shard", wk_shard, "DSHD shard to train on")->required();
  wk->add_option("--model", wk_model, "Model spec; defaults to softmax sized from the shard");
  wk->add_option("--id", wk_id, "Worker id (names the metrics file)")->capture_default_str();
  wk->add_option("--seed", wk_seed, "Sweep-order seed")->capture_default_str();
  add_hyper_flags(wk, wk_h);
  wk->add_option("--out", wk_out, "Output directory (default runs/<timestamp>)");
  wk->callback(
      [&] { rc = run_worker_cmd(wk_connect, wk_shard, wk_model, wk_id, wk_seed, wk_h, wk_out); });

  // data gen/partition/spill
  auto* data = app.add_subcommand("data", "Dataset tooling");
  data->require_subcommand(1);

  auto* gen = data->add_subcommand("gen", "Generate a synthetic classification dataset");
  DataFlags gen_d;
  uint64_t gen_seed = 0;
  std::string gen_name = "dataset.csv", gen_out;
  add_data_flags(gen, gen_d);
  gen->add_option("--seed", gen_seed, "Generation seed")->capture_default_str();
  gen->add_option("--name", gen_name, "Output file name")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory (default runs/<timestamp>)");
  gen->callback([&] { rc = run_data_gen(gen_d, gen_seed, gen_name, gen_out); });

  auto* part = data->add_subcommand("partition", "Shuffle-split a CSV into DSHD shards");
  std::string part_in, part_out;
  uint32_t part_n = 4;
  uint64_t part_seed = 0;
  part->add_option("--in", part_in, "Input CSV")->required();
  part->add_option("--n", part_n, "Number of shards")->capture_default_str();
  part->add_option("--seed", part_seed, "Shuffle seed")->capture_default_str();
  part->add_option("--out", part_out, "Output directory (default runs/<timestamp>)");
  part->callback([&] { rc = run_data_partition(part_in, part_n, part_seed, part_out); });

  auto* spill = data->add_subcommand("spill", "Write one CSV as a single DSHD shard");
  std::string spill_in, spill_out;
  uint32_t spill_id = 0;
  uint64_t spill_seed = 0;
  spill->add_option("--in", spill_in, "Input CSV")->required();
  spill->add_option("--id", spill_id, "Shard id for the file name")->capture_default_str();
  spill->add_option("--seed", spill_seed, "Seed recorded in the header")->capture_default_str();
  spill->add_option("--out", spill_out, "Output directory (default runs/<timestamp>)");
  spill->callback([&] { rc = run_data_spill(spill_in, spill_id, spill_seed, spill_out); });

  // simulate
  auto* sim = app.add_subcommand("simulate", "Deterministic multi-worker simulation");
  uint32_t sim_n = 1, sim_eval = 50;
  std::string sim_mode = "async", sim_model, sim_out;
  DataFlags sim_d;
  HyperFlags sim_h;
  double sim_c = 1.0, sim_s = 0.0, sim_holdout = 0.2, sim_target = 0.9;
  uint64_t sim_seed = 0, sim_baseline = 0;
  std::vector<double> sim_mults;
  bool sim_replicate = false;
  sim->add_option("--n", sim_n, "Worker count")->capture_default_str();
  sim->add_option("--mode", sim_mode, "async | sync")->capture_default_str();
  sim->add_option("--model", sim_model, "Model spec; defaults to softmax sized from the data");
  add_data_flags(sim, sim_d);
  add_hyper_flags(sim, sim_h);
  sim->add_option("--c", sim_c, "Virtual cost per minibatch")->capture_default_str();
  sim->add_option("--s", sim_s, "Virtual cost per exchange")->capture_default_str();
  sim->add_option("--eval-every", sim_eval, "Holdout evaluation cadence (iterations)")
      ->capture_default_str();
  sim->add_option("--holdout", sim_holdout, "Holdout fraction")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Master seed for schedule/init/data streams")
      ->capture_default_str();
  sim->add_option("--multipliers", sim_mults, "Per-worker cost multipliers")->delimiter(',');
  sim->add_flag("--replicate", sim_replicate,
                "Give every worker the full training split instead of a shard");
  sim->add_option("--target-acc", sim_target, "Accuracy target for N_a")->capture_default_str();
  sim->add_option("--baseline-n", sim_baseline,
                  "Single-worker N_a baseline; enables the d estimate");
  sim->add_option("--out", sim_out, "Output directory (default runs/<timestamp>)");
  sim->callback([&] {
    rc = run_simulate(sim_n, sim_mode, sim_model, sim_d, sim_h, sim_c, sim_s, sim_eval,
                      sim_holdout, sim_seed, sim_mults, sim_replicate, sim_target, sim_baseline,
                      sim_out);
  });

  // analyze speedup/sweep
  auto* an = app.add_subcommand("analyze", "Closed-form speed-up model");
  an->require_subcommand(1);
  uint64_t an_na = 1000;
  double an_c = 1.0, an_s = 0.0, an_soc = 0.0, an_d = 1.0, an_a = 0.5;
  uint32_t an_n = 1, an_tau = 1;

  auto add_speedup_flags = [&](CLI::App* cmd) {
    cmd->add_option("--n-a", an_na, "Iterations to target accuracy (single worker)")
        ->capture_default_str();
    cmd->add_option("--c", an_c, "Per-batch compute time")->capture_default_str();
    auto* s_opt = cmd->add_option("--s", an_s, "Per-exchange communication time");
    cmd->add_option("--s-over-c", an_soc, "Communication/computation ratio (sets S = ratio*C)")
        ->excludes(s_opt);
    cmd->add_option("--n", an_n, "Worker count")->capture_default_str();
    cmd->add_option("--tau", an_tau, "Communication period")->capture_default_str();
    cmd->add_option("--d", an_d, "Discrepancy penalty (>= 1)")->capture_default_str();
    cmd->add_option("--a", an_a, "Target accuracy (metadata)")->capture_default_str();
  };

  auto* asp = an->add_subcommand("speedup", "Evaluate the model at one point");
  std::string asp_out;
  add_speedup_flags(asp);
  asp->add_option("--out", asp_out, "Optional output directory for CSV + manifest");
  asp->callback(
      [&] { rc = run_analyze_speedup(an_na, an_c, an_s, an_soc, an_n, an_tau, an_d, an_a, asp_out); });

  auto* asw = an->add_subcommand("sweep", "Sweep one field over a list of values");
  std::string asw_vary = "n", asw_out;
  std::vector<double> asw_values;
  add_speedup_flags(asw);
  asw->add_option("--vary", asw_vary, "Field to sweep: n, tau, d, S, C, N_a")
      ->capture_default_str();
  asw->add_option("--values", asw_values, "Comma-separated values")->required()->delimiter(',');
  asw->add_option("--out", asw_out, "Output directory (default runs/<timestamp>)");
  asw->callback([&] {
    rc = run_analyze_sweep(an_na, an_c, an_s, an_soc, an_n, an_tau, an_d, an_a, asw_vary,
                           asw_values, asw_out);
  });

  // stats
  auto* st = app.add_subcommand("stats", "Query a running exchanger");
  std::string st_connect;
  st->add_option("--connect", st_connect, "Exchanger host:port")->required();
  st->callback([&] { rc = run_stats(st_connect); });

  // launch-local
  auto* ll = app.add_subcommand("launch-local",
                                "Run an exchanger plus n worker processes end to end");
  uint32_t ll_n = 4, ll_pool = 8;
  std::string ll_model, ll_mode = "locked", ll_out;
  DataFlags ll_d;
  HyperFlags ll_h;
  double ll_holdout = 0.2;
  uint64_t ll_seed = 0;
  ll->add_option("--n", ll_n, "Worker process count")->capture_default_str();
  ll->add_option("--model", ll_model, "Model spec; defaults to softmax sized from the data");
  add_data_flags(ll, ll_d);
  add_hyper_flags(ll, ll_h);
  ll->add_option("--pool", ll_pool, "Handler pool size (raised to n if smaller)")
      ->capture_default_str();
  ll->add_option("--mode", ll_mode, "locked | lockfree")->capture_default_str();
  ll->add_option("--holdout", ll_holdout, "Holdout fraction for the final evaluation")
      ->capture_default_str();
  ll->add_option("--seed", ll_seed, "Master seed for data/init/worker streams")
      ->capture_default_str();
  ll->add_option("--out", ll_out, "Output directory (default runs/<timestamp>)");
  ll->callback([&] {
    rc = run_launch_local(ll_n, ll_model, ll_d, ll_h, ll_pool, ll_mode, ll_holdout, ll_seed,
                          ll_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return rc;
}
