#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "config_json.hpp"
#include "oracles.hpp"
#include "schedlab/baselines.hpp"
#include "schedlab/drl.hpp"
#include "schedlab/metrics.hpp"
#include "schedlab/online.hpp"

namespace schedlab {

namespace fs = std::filesystem;

fs::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SCHEDLAB_OUT"); env && *env) return env;
  return fs::current_path();
}

void write_params_file(const fs::path& path, const MlpParams& net) {
  const std::vector<std::uint8_t> bytes = serialize(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

MlpParams read_params_file(const fs::path& path, OutputMap output) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize(bytes, output);
}

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> users;
  std::optional<int> rbs;
  std::optional<std::string> mode;
  std::vector<std::string> flags;
  std::optional<int> episodes;
  std::optional<std::string> exec;
  std::string out;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "JSON configuration file");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--users", o.users, "Number of users K");
  app->add_option("--rbs", o.rbs, "Number of resource blocks N");
  app->add_option("--mode", o.mode, "straightforward or tdrl");
  app->add_option("--flags", o.flags, "K-DDPG extensions: any of mh rs is, or none")
      ->expected(1, 3);
  app->add_option("--episodes", o.episodes, "Episodes to run");
  app->add_option("--exec", o.exec, "serial or parallel kernels");
  app->add_option("--out", o.out, "Output directory (default $SCHEDLAB_OUT or .)");
}

SystemConfig resolve_config(const CommonOptions& o) {
  nlohmann::json overrides = nlohmann::json::object();
  if (o.seed) overrides["seed"] = *o.seed;
  if (o.users) overrides["users"] = *o.users;
  if (o.rbs) overrides["rbs"] = *o.rbs;
  if (o.mode) overrides["mode"] = *o.mode;
  if (o.episodes) overrides["episodes"] = *o.episodes;
  if (o.exec) overrides["exec"] = *o.exec;
  if (!o.flags.empty()) {
    std::string joined;
    for (const auto& f : o.flags) joined += f + " ";
    overrides["flags"] = joined;
  }
  const SystemConfig base = o.config_path.empty() ? SystemConfig{} : load_config(o.config_path);
  return config_from_json(overrides, base);
}

fs::path prepare_out(const CommonOptions& o) {
  const fs::path dir = resolve_out_dir(o.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_csv(const fs::path& path, std::span<const EpisodeMetrics> rows) {
  std::ofstream out(path, std::ios::trunc);
  write_metrics_csv(out, rows);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Networks initial_networks(const SystemConfig& cfg, const std::string& actor_path,
                          const std::string& critic_path) {
  Rng init = SeedTree(cfg.seed).stream("init");
  Networks nets = Networks::init(cfg, init);
  if (!actor_path.empty()) nets.load_actor(read_params_file(actor_path, OutputMap::kHalfTanh));
  if (!critic_path.empty()) nets.load_critic(read_params_file(critic_path, OutputMap::kLinear));
  return nets;
}

// ---- train-offline ---------------------------------------------------------

int cmd_train(const CommonOptions& o, std::ostream& out) {
  const SystemConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(o);
  Trainer trainer(cfg);
  const auto windows = trainer.train([&](const EpisodeMetrics& m) {
    out << "window " << m.window << " loss " << format_double(m.mean_loss()) << " reward "
        << format_double(m.mean_reward()) << "\n";
  });
  write_text(dir / "config.json", dump_config(cfg));
  write_csv(dir / "metrics.csv", windows);
  write_params_file(dir / "actor.bin", trainer.networks().actor);
  write_params_file(dir / "critic.bin", trainer.networks().critic);
  out << "wrote " << (dir / "metrics.csv").string() << "\n";
  return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvalOptions {
  std::string policy = "edf";
  std::string actor;
  bool window_aware = false;
};

int cmd_evaluate(const CommonOptions& o, const EvalOptions& e, std::ostream& out) {
  const SystemConfig cfg = resolve_config(o);
  PolicyFactory factory;
  if (e.policy == "actor") {
    if (e.actor.empty()) throw ConfigError("--actor", "required with --policy actor");
    factory = actor_factory(read_params_file(e.actor, OutputMap::kHalfTanh), cfg);
  } else if (const auto kind = parse_baseline(e.policy)) {
    factory = baseline_factory(*kind, cfg, e.window_aware);
  } else {
    throw ConfigError("--policy", "expected rr, edf, mt or actor, got '" + e.policy + "'");
  }
  const fs::path dir = prepare_out(o);
  const EvalResult r = evaluate(cfg, factory, cfg.episodes, cfg.seed, cfg.exec);
  const EpisodeMetrics m = r.as_metrics(0);
  write_csv(dir / "evaluate.csv", std::span<const EpisodeMetrics>(&m, 1));
  out << e.policy << " over " << cfg.episodes << " episodes: loss " << format_double(r.mean_loss)
      << " reward " << format_double(r.mean_reward) << "\n";
  return 0;
}

// ---- run-online ------------------------------------------------------------

struct OnlineCliOptions {
  std::string actor;
  std::string critic;
  std::string listen;
  std::string connect;
  bool tcp = false;
  bool async = false;
  bool frozen = false;
  double snr_offset_db = 0.0;
  double deadline_us = 0.0;
  double accept_timeout_s = 60.0;
};

OnlineOptions online_options(const SystemConfig& cfg, const OnlineCliOptions& c) {
  OnlineOptions opt;
  opt.episodes = cfg.episodes;
  opt.lockstep = !c.async;
  opt.frozen = c.frozen;
  if (c.deadline_us > 0.0)
    opt.deadline = std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double, std::micro>(c.deadline_us));
  if (c.tcp) opt.transport = Transport::kTcp;
  return opt;
}

void print_online(const OnlineReport& r, std::ostream& out) {
  out << "windows " << r.windows.size() << " versions " << r.versions_received << " final "
      << r.final_version << " misses " << r.deadline_misses << " latency_s "
      << format_double(r.mean_reported_latency_s) << "\n";
}

int cmd_online(const CommonOptions& o, const OnlineCliOptions& c, std::ostream& out) {
  const SystemConfig cfg = resolve_config(o);
  SystemConfig env_cfg = cfg;
  env_cfg.snr_offset_db += c.snr_offset_db;
  const fs::path dir = prepare_out(o);
  const Networks init = initial_networks(cfg, c.actor, c.critic);
  const OnlineOptions opt = online_options(cfg, c);

  if (!c.listen.empty()) {
    EdgeServer server(cfg, init);
    TcpListener listener(Endpoint::parse(c.listen));
    out << "listening on port " << listener.port() << "\n" << std::flush;
    auto ch = listener.accept(std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(c.accept_timeout_s)));
    if (!ch) throw std::runtime_error("no BS connected within the accept timeout");
    std::atomic<bool> stop{false};
    server.serve(*ch, stop);
    write_params_file(dir / "online_actor.bin", server.networks().actor);
    write_params_file(dir / "online_critic.bin", server.networks().critic);
    const ServerStats& s = server.stats();
    out << "server batches " << s.batches << " iterations " << s.iterations << " pushes "
        << s.pushes << " connection_errors " << s.connection_errors << "\n";
    return 0;
  }

  OnlineReport report;
  if (!c.connect.empty()) {
    auto ch = tcp_connect(Endpoint::parse(c.connect), std::chrono::seconds(30));
    report = run_bs(env_cfg, init.actor, *ch, opt);
    ch->close();
  } else {
    report = run_online(env_cfg, init, opt);
    write_params_file(dir / "online_actor.bin", report.final_actor);
  }
  write_csv(dir / "online.csv", report.windows);
  print_online(report, out);
  return 0;
}

// ---- oracle ----------------------------------------------------------------

struct OracleRow {
  std::string metric;
  double value;
  double bound;
  bool exact_zero = false;  // value must be 0 rather than <= bound
};

int cmd_oracle(const CommonOptions& o, const std::string& suite, std::ostream& out) {
  const SystemConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(o);
  std::vector<std::pair<std::string, std::vector<OracleRow>>> results;
  const bool all = suite == "all";
  bool known = all;

  if (all || suite == "markov") {
    known = true;
    const auto r = oracle::markov_suite(cfg.arrival_prob, cfg.d_min, cfg.d_max, 1'000'000, cfg.seed,
                                        cfg.exec);
    results.push_back({"markov",
                       {{"max_abs_error", r.max_abs_error, 0.005},
                        {"max_row_sum_error", r.max_row_sum_error, 1e-12},
                        {"min_row_visits", static_cast<double>(r.min_row_visits), 0.0}}});
    results.back().second.back().bound = -1.0;  // informational
  }
  if (all || suite == "blocklength") {
    known = true;
    const auto r = oracle::blocklength_suite(1000, cfg.seed);
    results.push_back({"blocklength",
                       {{"scan_mismatches", double(r.scan_mismatches), 0.0, true},
                        {"monotone_n_violations", double(r.monotone_n_violations), 0.0, true},
                        {"monotone_snr_violations", double(r.monotone_snr_violations), 0.0, true},
                        {"max_rel_error_vs_hp", r.max_rel_error_vs_hp, 1e-6}}});
  }
  if (all || suite == "gradients") {
    known = true;
    const int heads = cfg.flags.multi_head ? cfg.users : 1;
    const auto r = oracle::gradient_suite(cfg.users, heads, 4, cfg.seed);
    std::vector<OracleRow> rows;
    for (const auto& l : r.layers) rows.push_back({l.name, l.rel_error, 1e-4});
    results.push_back({"gradients", rows});
  }
  if (all || suite == "shaping") {
    known = true;
    oracle::TabularMdp mdp;
    mdp.d_min = cfg.d_min;
    mdp.d_max = cfg.d_max;
    mdp.p = cfg.arrival_prob;
    mdp.gamma = cfg.gamma;
    mdp.eps = cfg.eps_max;
    mdp.potential = potential_of(cfg);
    const auto r = oracle::shaping_suite(mdp);
    results.push_back({"shaping",
                       {{"policy_mismatch", r.same_policy ? 0.0 : 1.0, 0.0, true},
                        {"max_q_offset_error", r.max_q_offset_error, 1e-6}}});
  }
  if (all || suite == "replay") {
    known = true;
    const auto r = oracle::replay_suite(50, 100000, cfg.seed);
    results.push_back({"replay",
                       {{"max_freq_error", r.max_freq_error, 0.02},
                        {"unbiased_rel_error", r.unbiased_rel_error, 0.01}}});
  }
  if (!known)
    throw ConfigError("suite", "expected markov, blocklength, gradients, shaping, replay or all");

  bool ok = true;
  std::ostringstream csv;
  csv << "suite,metric,value,bound,pass\n";
  for (const auto& [name, rows] : results) {
    for (const auto& row : rows) {
      const bool info = row.bound < 0.0;
      const bool pass = info || (row.exact_zero ? row.value == 0.0 : row.value <= row.bound);
      ok = ok && pass;
      csv << name << "," << row.metric << "," << format_double(row.value) << ","
          << (info ? std::string() : format_double(row.bound)) << "," << (pass ? 1 : 0) << "\n";
      out << (pass ? "PASS " : "FAIL ") << name << "." << row.metric << " = "
          << format_double(row.value) << "\n";
    }
  }
  write_text(dir / ("oracle_" + suite + ".csv"), csv.str());
  return ok ? 0 : 1;
}

// ---- export ----------------------------------------------------------------

int cmd_export(const CommonOptions& o, const std::string& params, const std::string& kind,
               std::ostream& out) {
  const SystemConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(o);
  if (params.empty()) {
    write_text(dir / "config.json", dump_config(cfg));
    out << "wrote " << (dir / "config.json").string() << "\n";
    return 0;
  }
  if (kind != "actor" && kind != "critic")
    throw ConfigError("--kind", "expected actor or critic, got '" + kind + "'");
  const MlpParams net =
      read_params_file(params, kind == "actor" ? OutputMap::kHalfTanh : OutputMap::kLinear);
  std::ostringstream csv;
  csv << "layer,param,row,col,value\n";
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    const DenseLayer& l = net.layers[li];
    for (int r = 0; r < l.out; ++r)
      for (int c = 0; c < l.in; ++c)
        csv << li << ",weight," << r << "," << c << ","
            << format_double(l.weights[static_cast<std::size_t>(r) * l.in + c]) << "\n";
    for (int r = 0; r < l.out; ++r)
      csv << li << ",bias," << r << ",0," << format_double(l.biases[r]) << "\n";
  }
  const fs::path path = dir / (kind + "_params.csv");
  write_text(path, csv.str());
  out << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Timeliness-aware downlink scheduling: training, evaluation and oracles", "schedlab"};
  app.require_subcommand(1);

  CommonOptions train_o, eval_o, online_o, oracle_o, export_o;
  auto* train = app.add_subcommand("train-offline", "Train K-DDPG or DDPG in simulation");
  add_common(train, train_o);

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("evaluate", "Evaluate a baseline or a trained actor");
  add_common(eval, eval_o);
  eval->add_option("--policy", eval_opts.policy, "rr, edf, mt or actor");
  eval->add_option("--actor", eval_opts.actor, "Actor parameter file for --policy actor");
  eval->add_flag("--window-aware", eval_opts.window_aware,
                 "Hold back users whose HoL delay is below d_min");

  OnlineCliOptions online_opts;
  auto* online = app.add_subcommand("run-online", "BS agent and edge server fine-tuning loop");
  add_common(online, online_o);
  online->add_option("--actor", online_opts.actor, "Initial actor parameters");
  online->add_option("--critic", online_opts.critic, "Initial critic parameters");
  auto* listen = online->add_option("--listen", online_opts.listen, "Run only the server, ADDR:PORT");
  online->add_option("--connect", online_opts.connect, "Run only the BS, ADDR:PORT")
      ->excludes(listen);
  online->add_flag("--tcp", online_opts.tcp, "Use loopback TCP instead of an in-process pipe");
  online->add_flag("--async", online_opts.async, "Do not wait for the server after each upload");
  online->add_flag("--frozen", online_opts.frozen, "Run the initial actor without fine-tuning");
  online->add_option("--snr-offset-db", online_opts.snr_offset_db,
                     "SNR perturbation of the BS environment");
  online->add_option("--deadline-us", online_opts.deadline_us,
                     "Per-TTI inference budget in microseconds (0 = none)");
  online->add_option("--accept-timeout", online_opts.accept_timeout_s,
                     "Seconds the server waits for a BS");

  std::string suite = "all";
  auto* oracle = app.add_subcommand("oracle", "Run an oracle suite");
  add_common(oracle, oracle_o);
  oracle->add_option("suite", suite, "markov, blocklength, gradients, shaping, replay or all");

  std::string export_params, export_kind = "actor";
  auto* exp = app.add_subcommand("export", "Write parameters or the resolved config as CSV/JSON");
  add_common(exp, export_o);
  exp->add_option("--params", export_params, "Parameter file to dump");
  exp->add_option("--kind", export_kind, "actor or critic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*train) return cmd_train(train_o, out);
    if (*eval) return cmd_evaluate(eval_o, eval_opts, out);
    if (*online) return cmd_online(online_o, online_opts, out);
    if (*oracle) return cmd_oracle(oracle_o, suite, out);
    if (*exp) return cmd_export(export_o, export_params, export_kind, out);
  } catch (const ConfigError& e) {
    err << "configuration error in field '" << e.field() << "': " << e.what() << "\n";
    return 2;
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace schedlab
