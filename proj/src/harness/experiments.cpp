#include "noisyq/harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "noisyq/audit.hpp"
#include "noisyq/harness/checkpoint.hpp"
#include "noisyq/harness/csv.hpp"
#include "noisyq/rng.hpp"
#include "noisyq/value_iteration.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace noisyq::harness {

namespace fs = std::filesystem;

double oracle_optimal_return(const envs::EnvSpec& spec, double gamma, int episodes) {
  auto env = envs::make_env(spec);
  auto vi = envs::optimal_values(*env, gamma);
  std::uint64_t base = substream_seed(detail::fnv1a64("oracle-eval"), spec.name);
  return envs::oracle_mean_return(*env, vi, episodes, base);
}

std::vector<std::string> metrics_columns() {
  return {"run_id",     "arm",        "seed",       "agent_kind",    "env",
          "step",       "episodes",   "mean_return", "min_return",   "max_return",
          "stderr_return", "td_loss", "epsilon",    "noise_mode",    "attack_success_rate",
          "transfer_rate"};
}

std::vector<std::string> metrics_cells(const MetricsRecord& r) {
  return {r.run_id,
          r.arm,
          fmt_int(static_cast<long long>(r.seed)),
          r.agent_kind,
          r.env_name,
          fmt_int(r.step),
          fmt_int(r.eval_episodes),
          fmt_double(r.mean_return),
          fmt_double(r.min_return),
          fmt_double(r.max_return),
          fmt_double(r.stderr_return),
          r.has_td_loss ? fmt_double(r.td_loss) : "",
          r.has_epsilon ? fmt_double(r.epsilon) : "",
          r.noise_mode,
          r.has_attack_success ? fmt_double(r.attack_success_rate) : "",
          r.has_transfer_rate ? fmt_double(r.transfer_rate) : ""};
}

namespace {

constexpr const char* kMetricsSchema = "metrics.v1";
constexpr const char* kReportSchema = "attack_report.v1";
constexpr const char* kReplicateSchema = "replicate.v1";
constexpr const char* kCompareSchema = "compare.v1";

std::string kind_of(const agent::TrainerConfig& t) { return agent::agent_kind_name(t.kind); }

std::string make_run_id(const ExperimentConfig& cfg, const std::string& command,
                        std::uint64_t seed, const std::string& extra = "") {
  std::string id;
  if (!cfg.run_label.empty()) id += cfg.run_label + "_";
  id += command;
  if (!extra.empty()) id += "_" + extra;
  id += "_" + cfg.env.name + "_" + kind_of(cfg.trainer) + "_s" + std::to_string(seed);
  return id;
}

fs::path prepare_run_dir(const ExperimentConfig& cfg, const std::string& run_id) {
  fs::path dir = cfg.out_dir / run_id;
  fs::create_directories(dir);
  atomic_write_text(dir / "config.ini", cfg.serialize());
  return dir;
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRecord>& records) {
  CsvWriter csv(path, kMetricsSchema, metrics_columns());
  for (const MetricsRecord& r : records) csv.row(metrics_cells(r));
  csv.close();
}

std::vector<std::string> report_columns() {
  return {"run_id", "env",    "agent_kind", "seed",           "lambda",
          "source", "loss",   "row",        "condition",      "episode",
          "episode_return",   "success_on_source", "transfer_to_victim",
          "clean_mean",       "random_mean", "adv_mean"};
}

void write_report_csv(const fs::path& path, const attacks::AttackReport& rep) {
  CsvWriter csv(path, kReportSchema, report_columns());
  auto common = [&](const char* row, const std::string& condition, int episode,
                    const std::string& ret) {
    std::vector<std::string> cells = {rep.run_id,
                                      rep.env_name,
                                      rep.agent_kind,
                                      fmt_int(static_cast<long long>(rep.seed)),
                                      fmt_double(rep.lambda),
                                      rep.source,
                                      rep.loss,
                                      row,
                                      condition,
                                      episode >= 0 ? fmt_int(episode) : "",
                                      ret,
                                      "",
                                      "",
                                      "",
                                      "",
                                      ""};
    return cells;
  };
  auto emit_condition = [&](const std::string& condition, const std::vector<double>& returns) {
    for (std::size_t i = 0; i < returns.size(); ++i) {
      csv.row(common("episode", condition, static_cast<int>(i), fmt_double(returns[i])));
    }
  };
  emit_condition("clean", rep.clean_returns);
  emit_condition("random", rep.random_returns);
  emit_condition("adversarial", rep.adv_returns);
  std::vector<std::string> summary = common("summary", "", -1, "");
  summary[11] = fmt_double(rep.success_on_source);
  summary[12] = fmt_double(rep.transfer_to_victim);
  summary[13] = fmt_double(rep.clean_mean());
  summary[14] = fmt_double(rep.random_mean());
  summary[15] = fmt_double(rep.adv_mean());
  csv.row(summary);
  csv.close();
}

nets::Arch replica_arch(const ExperimentConfig& cfg, const nets::Arch& target_arch) {
  nets::Arch arch = target_arch;
  if (cfg.attack.replica_hidden) arch.hidden = *cfg.attack.replica_hidden;
  if (cfg.attack.replica_kind) {
    arch.kind = nets::kind_from_name(*cfg.attack.replica_kind);
  }
  return arch;
}

agent::TrainerConfig replica_trainer(const ExperimentConfig& cfg, const nets::Arch& arch) {
  agent::TrainerConfig t = cfg.trainer;
  t.kind = arch.kind == nets::Kind::Noisy ? agent::AgentKind::Noisy : agent::AgentKind::EpsGreedy;
  t.hidden = arch.hidden;
  return t;
}

attacks::AdvReward parse_adv_reward(const ExperimentConfig& cfg) {
  attacks::AdvReward r;
  if (cfg.attack.adv_reward == "negate") {
    r.kind = attacks::AdvReward::Kind::Negate;
  } else {
    r.kind = attacks::AdvReward::Kind::FixedAction;
    r.fixed_action = std::stoi(cfg.attack.adv_reward.substr(6));
  }
  return r;
}

std::uint64_t adversary_seed(const std::string& env_name) {
  return substream_seed(detail::fnv1a64("adversary"), env_name);
}

agent::TrainerConfig adversary_trainer(const ExperimentConfig& cfg) {
  agent::TrainerConfig t = cfg.trainer;
  t.kind = agent::AgentKind::EpsGreedy;
  t.total_steps = cfg.attack.adv_policy_steps;
  t.eps.decay_steps = std::max<std::int64_t>(1, cfg.attack.adv_policy_steps / 10);
  t.seed = adversary_seed(cfg.env.name);
  t.eval_cadence = std::max(1000, cfg.trainer.eval_cadence);
  t.eval_episodes = 30;
  return t;
}

}  // namespace

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg,
                    const std::vector<fs::path>& checkpoints, double wall_seconds,
                    const std::string& status) {
  std::ostringstream out;
  out << "artifact: noisyq v1\n";
  out << "status: " << status << "\n";
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(config_hash(cfg.serialize())));
  out << "config_hash: " << hash << "\n";
  out << "wall_clock_s: " << fmt_double(wall_seconds) << "\n";
  for (const fs::path& p : checkpoints) out << "checkpoint: " << p.string() << "\n";
  atomic_write_text(dir / "manifest.txt", out.str());
}

TrainRunResult run_train(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  auto started = std::chrono::steady_clock::now();
  TrainRunResult result;
  result.run_id = make_run_id(cfg, "train", seed);
  result.dir = prepare_run_dir(cfg, result.run_id);
  result.oracle_return = oracle_optimal_return(cfg.env, cfg.trainer.gamma);

  auto env = envs::make_env(cfg.env);
  agent::TrainerConfig tcfg = cfg.trainer;
  tcfg.seed = seed;
  agent::Trainer trainer(*env, tcfg);

  std::vector<MetricsRecord> records;
  fs::path latest = result.dir / "ckpt_latest.txt";
  result.final_checkpoint = result.dir / "ckpt_final.txt";

  agent::RunHooks hooks;
  hooks.run_id = result.run_id;
  hooks.on_metrics = [&](const MetricsRecord& r) { records.push_back(r); };
  hooks.on_checkpoint = [&](const nets::QNetwork& net, std::int64_t step, bool final) {
    checkpoint_save(net, step, seed, final ? result.final_checkpoint : latest);
  };
  if (cfg.early_stop) {
    hooks.early_stop_return = cfg.early_stop_fraction * result.oracle_return;
  }

  result.summary = trainer.run(hooks);

  result.metrics_csv = result.dir / "metrics.csv";
  write_metrics_csv(result.metrics_csv, records);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_manifest(result.dir, cfg, {result.final_checkpoint}, wall, "completed");
  return result;
}

ReplicateResult run_replicate(const ExperimentConfig& cfg, std::uint64_t seed,
                              const fs::path& target_checkpoint) {
  cfg.validate();
  auto started = std::chrono::steady_clock::now();
  LoadedCheckpoint target = checkpoint_load(target_checkpoint);
  if (target.net.input_width() != cfg.env.obs_len()) {
    throw std::runtime_error("replicate: checkpoint input width does not match the environment");
  }
  target.net.set_tag("target");

  ExperimentConfig cfg_for_id = cfg;
  cfg_for_id.trainer.kind = target.net.kind() == nets::Kind::Noisy ? agent::AgentKind::Noisy
                                                                   : agent::AgentKind::EpsGreedy;
  ReplicateResult result;
  result.run_id = make_run_id(cfg_for_id, "replicate", seed);
  result.dir = prepare_run_dir(cfg_for_id, result.run_id);

  std::uint64_t attacker = substream_seed(seed, "attacker");
  nets::Arch arch = replica_arch(cfg, target.net.arch());
  attacks::ReplicaConfig rc;
  rc.trainer = replica_trainer(cfg, arch);
  rc.train_every = cfg.attack.replica_train_every;
  attacks::Replica replica(arch, rc, attacker);

  auto env = envs::make_env(cfg.env);
  agent::PolicySnapshot target_policy(
      target.net,
      target.net.kind() == nets::Kind::Noisy ? cfg.trainer.eval_noise : agent::NoiseMode::Mean,
      substream_seed(attacker, "observed-target-noise"));

  auto sample_env = envs::make_env(cfg.env);
  std::vector<envs::Observation> probe =
      envs::sample_states(*sample_env, 500, substream_seed(attacker, "agreement-states"));

  CsvWriter csv(result.dir / "agreement.csv", kReplicateSchema,
                {"run_id", "seed", "env", "target_kind", "replica_kind", "observed_steps",
                 "agreement"});
  auto emit = [&](std::int64_t observed, double agreement) {
    csv.row({result.run_id, fmt_int(static_cast<long long>(seed)), cfg.env.name,
             nets::kind_name(target.net.kind()), nets::kind_name(arch.kind), fmt_int(observed),
             fmt_double(agreement)});
  };

  result.initial_agreement = attacks::policy_agreement(replica.net(), target.net, probe);
  emit(0, result.initial_agreement);

  Rng episode_rng(attacker, "replicate-env");
  std::int64_t observed = 0;
  const std::int64_t total = cfg.attack.replica_steps;
  while (observed < total) {
    envs::Observation obs = env->reset(episode_rng.next_u64());
    while (!env->done() && observed < total) {
      int action = target_policy.act(obs);
      envs::StepResult sr = env->step(action);
      agent::Transition t{obs, action, agent::clip_reward(sr.reward), sr.obs, sr.terminal};
      {
        audit::AttackerScope scope;
        replica.observe(t);
      }
      obs = std::move(sr.obs);
      ++observed;
      if (observed % 1000 == 0) {
        emit(observed, attacks::policy_agreement(replica.net(), target.net, probe));
      }
    }
  }
  result.observed_steps = observed;
  result.final_agreement = attacks::policy_agreement(replica.net(), target.net, probe);
  emit(observed + 1, result.final_agreement);
  csv.close();
  result.agreement_csv = result.dir / "agreement.csv";

  result.replica_checkpoint = result.dir / "replica_ckpt.txt";
  checkpoint_save(replica.net(), replica.trained(), attacker, result.replica_checkpoint);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_manifest(result.dir, cfg_for_id, {result.replica_checkpoint}, wall, "completed");
  return result;
}

AttackTestResult run_attack_test(const ExperimentConfig& cfg, std::uint64_t seed,
                                 const fs::path& target_checkpoint,
                                 const std::optional<fs::path>& replica_checkpoint) {
  cfg.validate();
  auto started = std::chrono::steady_clock::now();
  bool blackbox = cfg.attack.source == "blackbox";
  if (blackbox && !replica_checkpoint) {
    throw ConfigError("attack-test: blackbox source needs a replica checkpoint");
  }
  LoadedCheckpoint target = checkpoint_load(target_checkpoint);
  if (target.net.input_width() != cfg.env.obs_len()) {
    throw std::runtime_error("attack-test: checkpoint input width does not match the environment");
  }
  target.net.set_tag("target");

  std::optional<LoadedCheckpoint> replica;
  if (blackbox) {
    replica = checkpoint_load(*replica_checkpoint);
    replica->net.set_tag("replica");
    if (replica->net.input_width() != cfg.env.obs_len()) {
      throw std::runtime_error("attack-test: replica input width does not match the environment");
    }
  }

  ExperimentConfig cfg_for_id = cfg;
  cfg_for_id.trainer.kind = target.net.kind() == nets::Kind::Noisy ? agent::AgentKind::Noisy
                                                                   : agent::AgentKind::EpsGreedy;
  AttackTestResult result;
  result.run_id = make_run_id(cfg_for_id, "attacktest", seed, cfg.attack.source);
  result.dir = prepare_run_dir(cfg_for_id, result.run_id);

  auto env = envs::make_env(cfg.env);
  attacks::TestTimeAttackConfig tc;
  tc.lambda = cfg.attack.lambda;
  tc.episodes = cfg.trainer.eval_episodes;
  tc.loss = cfg.attack.loss;
  tc.victim_noise = cfg.trainer.eval_noise;
  tc.attack_rate = cfg.attack.attack_rate;
  tc.seed = substream_seed(seed, "attack-test");

  result.report =
      attacks::test_time_attack(target.net, *env, replica ? &replica->net : nullptr, tc);
  result.report.run_id = result.run_id;
  result.report.seed = seed;

  result.report_csv = result.dir / "report.csv";
  write_report_csv(result.report_csv, result.report);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_manifest(result.dir, cfg_for_id, {}, wall, "completed");
  return result;
}

AttackTrainResult run_attack_train(const ExperimentConfig& cfg, std::uint64_t seed,
                                   Policy* adv_policy) {
  cfg.validate();
  auto started = std::chrono::steady_clock::now();
  AttackTrainResult result;
  result.run_id = make_run_id(cfg, "attacktrain", seed);
  result.dir = prepare_run_dir(cfg, result.run_id);
  result.oracle_return = oracle_optimal_return(cfg.env, cfg.trainer.gamma);

  std::vector<MetricsRecord> records;
  result.control_checkpoint = result.dir / "ckpt_control.txt";
  result.attacked_checkpoint = result.dir / "ckpt_attacked.txt";

  agent::TrainerConfig tcfg = cfg.trainer;
  tcfg.seed = seed;

  {  // unattacked control with matched seed streams
    auto env = envs::make_env(cfg.env);
    agent::Trainer trainer(*env, tcfg);
    agent::RunHooks hooks;
    hooks.run_id = result.run_id;
    hooks.on_metrics = [&](const MetricsRecord& r) {
      MetricsRecord c = r;
      c.arm = "control";
      records.push_back(std::move(c));
    };
    hooks.on_checkpoint = [&](const nets::QNetwork& net, std::int64_t step, bool final) {
      if (final) checkpoint_save(net, step, seed, result.control_checkpoint);
    };
    result.control_final = trainer.run(hooks).final_eval_mean;
  }

  {  // attacked run
    auto env = envs::make_env(cfg.env);
    nets::Arch target_arch;
    target_arch.input = cfg.env.obs_len();
    target_arch.hidden = cfg.trainer.hidden;
    target_arch.output = static_cast<std::size_t>(env->actions());
    target_arch.kind =
        cfg.trainer.kind == agent::AgentKind::Noisy ? nets::Kind::Noisy : nets::Kind::Plain;

    attacks::TrainTimeAttackConfig ac;
    ac.lambda = cfg.attack.lambda;
    ac.loss = cfg.attack.loss;
    ac.trigger_fraction = cfg.attack.trigger_fraction;
    ac.oracle_optimal_return = result.oracle_return;
    ac.adv_reward = parse_adv_reward(cfg);
    ac.adv_trainer = adversary_trainer(cfg);
    nets::Arch rep_arch = replica_arch(cfg, target_arch);
    ac.replica.trainer = replica_trainer(cfg, rep_arch);
    ac.replica.train_every = cfg.attack.replica_train_every;
    ac.attacker_seed = substream_seed(seed, "attacker");

    agent::RunHooks hooks;
    hooks.run_id = result.run_id;
    hooks.on_metrics = [&](const MetricsRecord& r) {
      MetricsRecord a = r;
      a.arm = "attacked";
      records.push_back(std::move(a));
    };
    hooks.on_checkpoint = [&](const nets::QNetwork& net, std::int64_t step, bool final) {
      if (final) checkpoint_save(net, step, seed, result.attacked_checkpoint);
    };
    attacks::TrainTimeAttackResult ar =
        attacks::policy_induction_attack(*env, tcfg, ac, hooks, adv_policy);
    result.attacked_final = ar.summary.final_eval_mean;
    result.trigger_step = ar.trigger_step;
    result.attack_success_rate = ar.attack_success_rate;
  }

  std::stable_sort(records.begin(), records.end(),
                   [](const MetricsRecord& a, const MetricsRecord& b) {
                     if (a.step != b.step) return a.step < b.step;
                     return a.arm < b.arm;  // attacked before control at equal steps
                   });
  result.metrics_csv = result.dir / "metrics.csv";
  write_metrics_csv(result.metrics_csv, records);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_manifest(result.dir, cfg, {result.control_checkpoint, result.attacked_checkpoint}, wall,
                 "completed");
  return result;
}

namespace {

struct ReportStats {
  std::string env, kind, source, loss;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double clean = 0.0, random_v = 0.0, adv = 0.0;
  double success = 0.0, transfer = 0.0;
  double degradation() const { return clean > 0.0 ? (clean - adv) / clean : 0.0; }
};

ReportStats stats_from_csv(const fs::path& path) {
  CsvTable t = read_csv(path, kReportSchema);
  ReportStats s;
  bool found = false;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (t.cell(i, "row") != "summary") continue;
    s.env = t.cell(i, "env");
    s.kind = t.cell(i, "agent_kind");
    s.source = t.cell(i, "source");
    s.loss = t.cell(i, "loss");
    s.seed = std::strtoull(t.cell(i, "seed").c_str(), nullptr, 10);
    s.lambda = std::strtod(t.cell(i, "lambda").c_str(), nullptr);
    s.clean = std::strtod(t.cell(i, "clean_mean").c_str(), nullptr);
    s.random_v = std::strtod(t.cell(i, "random_mean").c_str(), nullptr);
    s.adv = std::strtod(t.cell(i, "adv_mean").c_str(), nullptr);
    s.success = std::strtod(t.cell(i, "success_on_source").c_str(), nullptr);
    s.transfer = std::strtod(t.cell(i, "transfer_to_victim").c_str(), nullptr);
    found = true;
  }
  if (!found) throw std::runtime_error("report " + path.string() + " has no summary row");
  return s;
}

std::string verdict_for(int total, int satisfied) {
  if (total < 5) return "insufficient-seeds";
  int required = static_cast<int>(std::ceil(0.8 * total));
  return satisfied >= required ? "pass" : "fail";
}

}  // namespace

CompareOutput compare_reports(const std::vector<fs::path>& report_csvs, const fs::path& out_dir) {
  if (report_csvs.size() < 2) {
    throw ConfigError("compare: need at least two reports");
  }
  std::vector<ReportStats> reports;
  reports.reserve(report_csvs.size());
  for (const fs::path& p : report_csvs) reports.push_back(stats_from_csv(p));

  CompareOutput out;
  std::ostringstream text;
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-10s %-5s %-9s %-9s  %8s %8s %8s %8s %8s %8s\n", "env",
                "kind", "seed", "source", "lambda", "clean", "random", "adv", "degrade", "success",
                "transfer");
  text << line;
  for (const ReportStats& r : reports) {
    std::snprintf(line, sizeof line,
                  "%-12s %-10s %-5llu %-9s %-9.5f  %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                  r.env.c_str(), r.kind.c_str(), static_cast<unsigned long long>(r.seed),
                  r.source.c_str(), r.lambda, r.clean, r.random_v, r.adv, r.degradation(),
                  r.success, r.transfer);
    text << line;
  }

  // Self-comparison: duplicate keys get a delta block (all zeros for identical reports).
  if (reports.size() == 2 && reports[0].env == reports[1].env &&
      reports[0].kind == reports[1].kind && reports[0].seed == reports[1].seed &&
      reports[0].source == reports[1].source) {
    text << "\ndeltas (report 2 - report 1):\n";
    std::snprintf(line, sizeof line,
                  "  clean %+.17g  random %+.17g  adv %+.17g  success %+.17g  transfer %+.17g\n",
                  reports[1].clean - reports[0].clean, reports[1].random_v - reports[0].random_v,
                  reports[1].adv - reports[0].adv, reports[1].success - reports[0].success,
                  reports[1].transfer - reports[0].transfer);
    text << line;
  }

  // Seed-matched plain-vs-noisy claims per (env, source).
  std::map<std::pair<std::string, std::string>, std::map<std::uint64_t, ReportStats>> plain, noisy;
  for (const ReportStats& r : reports) {
    auto key = std::make_pair(r.env, r.source);
    if (r.kind == "noisy") noisy[key][r.seed] = r;
    else plain[key][r.seed] = r;
  }

  for (auto& [key, plain_by_seed] : plain) {
    // adversarial-worse-than-random holds per plain report on its own
    int total = 0, satisfied = 0;
    for (auto& [seed, r] : plain_by_seed) {
      ++total;
      if (r.adv < r.random_v && r.random_v < r.clean) ++satisfied;
    }
    out.claims.push_back({"plain_adv_below_random_below_clean", key.first, key.second, total,
                          satisfied, verdict_for(total, satisfied)});

    auto it = noisy.find(key);
    if (it == noisy.end()) continue;
    int pair_total = 0, degr = 0, transf = 0;
    for (auto& [seed, p] : plain_by_seed) {
      auto nit = it->second.find(seed);
      if (nit == it->second.end()) continue;
      ++pair_total;
      if (nit->second.degradation() < p.degradation()) ++degr;
      if (nit->second.transfer < p.transfer) ++transf;
    }
    out.claims.push_back({"noisy_degrades_less", key.first, key.second, pair_total, degr,
                          verdict_for(pair_total, degr)});
    out.claims.push_back({"noisy_transfers_less", key.first, key.second, pair_total, transf,
                          verdict_for(pair_total, transf)});
  }

  text << "\nclaims:\n";
  for (const CompareClaim& c : out.claims) {
    std::snprintf(line, sizeof line, "  %-36s %-12s %-9s %d/%d %s\n", c.claim.c_str(),
                  c.env.c_str(), c.source.c_str(), c.seeds_satisfied, c.seeds_total,
                  c.verdict.c_str());
    text << line;
  }
  out.text = text.str();

  fs::create_directories(out_dir);
  out.summary_csv = out_dir / "compare_summary.csv";
  CsvWriter csv(out.summary_csv, kCompareSchema,
                {"row", "claim", "env", "kind", "seed", "source", "lambda", "clean_mean",
                 "random_mean", "adv_mean", "degradation", "success_rate", "transfer_rate",
                 "seeds_total", "seeds_satisfied", "verdict"});
  for (const ReportStats& r : reports) {
    csv.row({"report", "", r.env, r.kind, fmt_int(static_cast<long long>(r.seed)), r.source,
             fmt_double(r.lambda), fmt_double(r.clean), fmt_double(r.random_v), fmt_double(r.adv),
             fmt_double(r.degradation()), fmt_double(r.success), fmt_double(r.transfer), "", "",
             ""});
  }
  for (const CompareClaim& c : out.claims) {
    csv.row({"claim", c.claim, c.env, "", "", c.source, "", "", "", "", "", "", "",
             fmt_int(c.seeds_total), fmt_int(c.seeds_satisfied), c.verdict});
  }
  csv.close();
  return out;
}

namespace {

ExperimentConfig cell_config(const ExperimentConfig& base, const std::string& env_name,
                             const std::string& kind) {
  ExperimentConfig local = base;
  if (base.env.name != env_name) local.env = envs::EnvSpec::preset(env_name);
  local.trainer.kind = agent::agent_kind_from_name(kind);
  return local;
}

template <typename Fn>
void parallel_cells(std::size_t count, Fn&& body) {
  std::vector<std::string> errors(count);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (std::size_t i = 0; i < count; ++i) {
    try {
      body(i);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) throw std::runtime_error("suite cell failed: " + e);
  }
}

}  // namespace

TestTimeSuiteResult run_suite_test_time(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<std::string> kinds = {"eps_greedy", "noisy"};
  TestTimeSuiteResult suite;
  for (const std::string& env_name : cfg.suite_envs) {
    for (std::uint64_t seed : cfg.seeds) {
      for (const std::string& kind : kinds) {
        TestTimeCell cell;
        cell.env = env_name;
        cell.kind = kind;
        cell.seed = seed;
        suite.cells.push_back(std::move(cell));
      }
    }
  }

  parallel_cells(suite.cells.size(), [&](std::size_t i) {
    TestTimeCell& cell = suite.cells[i];
    ExperimentConfig local = cell_config(cfg, cell.env, cell.kind);
    cell.train = run_train(local, cell.seed);
    cell.replicate = run_replicate(local, cell.seed, cell.train.final_checkpoint);

    ExperimentConfig wb = local;
    wb.attack.source = "whitebox";
    AttackTestResult w = run_attack_test(wb, cell.seed, cell.train.final_checkpoint, std::nullopt);
    cell.whitebox = w.report;
    cell.whitebox_csv = w.report_csv;

    ExperimentConfig bb = local;
    bb.attack.source = "blackbox";
    AttackTestResult b = run_attack_test(bb, cell.seed, cell.train.final_checkpoint,
                                         cell.replicate.replica_checkpoint);
    cell.blackbox = b.report;
    cell.blackbox_csv = b.report_csv;

    // Shared per-env state sample for transferability comparisons.
    auto env = envs::make_env(local.env);
    std::vector<envs::Observation> states = envs::sample_states(
        *env, 1000, substream_seed(detail::fnv1a64("transfer-sample"), local.env.name));
    LoadedCheckpoint target = checkpoint_load(cell.train.final_checkpoint);
    target.net.set_tag("target");
    LoadedCheckpoint replica = checkpoint_load(cell.replicate.replica_checkpoint);
    replica.net.set_tag("replica");
    attacks::TransferConfig tc;
    tc.lambda = local.attack.lambda;
    tc.loss = local.attack.loss;
    tc.noise_seed = substream_seed(cell.seed, "transfer-noise");
    cell.transfer_replica_rate = attacks::transferability_rate(replica.net, target.net, states, tc);
    cell.transfer_self_rate = attacks::transferability_rate(target.net, target.net, states, tc);
  });

  fs::path suite_dir = cfg.out_dir / (cfg.run_label.empty() ? std::string("suite_test_time")
                                                            : cfg.run_label + "_suite_test_time");
  fs::create_directories(suite_dir);
  suite.summary_csv = suite_dir / "summary.csv";
  CsvWriter csv(suite.summary_csv, "suite_test_time.v1",
                {"env", "kind", "seed", "steps_run", "final_return", "oracle_return",
                 "replica_agreement", "clean_mean", "random_mean", "adv_whitebox_mean",
                 "adv_blackbox_mean", "degradation_whitebox", "degradation_blackbox",
                 "transfer_replica", "transfer_self"});
  for (const TestTimeCell& c : suite.cells) {
    csv.row({c.env, c.kind, fmt_int(static_cast<long long>(c.seed)),
             fmt_int(c.train.summary.steps_run), fmt_double(c.train.summary.final_eval_mean),
             fmt_double(c.train.oracle_return), fmt_double(c.replicate.final_agreement),
             fmt_double(c.whitebox.clean_mean()), fmt_double(c.whitebox.random_mean()),
             fmt_double(c.whitebox.adv_mean()), fmt_double(c.blackbox.adv_mean()),
             fmt_double(c.whitebox.degradation()), fmt_double(c.blackbox.degradation()),
             fmt_double(c.transfer_replica_rate), fmt_double(c.transfer_self_rate)});
  }
  csv.close();

  std::vector<fs::path> all_reports;
  for (const TestTimeCell& c : suite.cells) {
    all_reports.push_back(c.whitebox_csv);
    all_reports.push_back(c.blackbox_csv);
  }
  suite.compare = compare_reports(all_reports, suite_dir);
  return suite;
}

TrainTimeSuiteResult run_suite_train_time(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<std::string> kinds = {"eps_greedy", "noisy"};
  TrainTimeSuiteResult suite;

  for (const std::string& env_name : cfg.suite_envs) {
    // One adversarial policy per environment, shared read-only by all cells.
    ExperimentConfig env_cfg = cell_config(cfg, env_name, "eps_greedy");
    std::unique_ptr<Policy> adversary;
    {
      audit::AttackerScope scope;
      auto env = envs::make_env(env_cfg.env);
      adversary =
          attacks::train_adversarial_policy(*env, parse_adv_reward(env_cfg), adversary_trainer(env_cfg));
    }

    std::vector<TrainTimeCell> cells;
    for (std::uint64_t seed : cfg.seeds) {
      for (const std::string& kind : kinds) {
        TrainTimeCell cell;
        cell.env = env_name;
        cell.kind = kind;
        cell.seed = seed;
        cells.push_back(std::move(cell));
      }
    }
    parallel_cells(cells.size(), [&](std::size_t i) {
      TrainTimeCell& cell = cells[i];
      ExperimentConfig local = cell_config(cfg, cell.env, cell.kind);
      cell.result = run_attack_train(local, cell.seed, adversary.get());
    });
    for (TrainTimeCell& c : cells) suite.cells.push_back(std::move(c));
  }

  fs::path suite_dir = cfg.out_dir / (cfg.run_label.empty() ? std::string("suite_train_time")
                                                            : cfg.run_label + "_suite_train_time");
  fs::create_directories(suite_dir);
  suite.summary_csv = suite_dir / "summary.csv";
  CsvWriter csv(suite.summary_csv, "suite_train_time.v1",
                {"env", "kind", "seed", "control_final", "attacked_final", "attacked_over_control",
                 "trigger_step", "attack_success_rate", "oracle_return"});
  for (const TrainTimeCell& c : suite.cells) {
    double ratio = c.result.control_final > 0.0 ? c.result.attacked_final / c.result.control_final
                                                : 0.0;
    csv.row({c.env, c.kind, fmt_int(static_cast<long long>(c.seed)),
             fmt_double(c.result.control_final), fmt_double(c.result.attacked_final),
             fmt_double(ratio), fmt_int(c.result.trigger_step),
             fmt_double(c.result.attack_success_rate), fmt_double(c.result.oracle_return)});
  }
  csv.close();
  return suite;
}

}  // namespace noisyq::harness
