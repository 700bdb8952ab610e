#include "noisyq/harness/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "noisyq/harness/csv.hpp"
#include "noisyq/rng.hpp"

namespace noisyq::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') throw ConfigError("config: " + key + " wants a number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') throw ConfigError("config: " + key + " wants an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " wants a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const std::string& tok : split_list(v)) {
    long long w = to_int(key, tok);
    if (w <= 0) throw ConfigError("config: " + key + " wants positive widths");
    out.push_back(static_cast<std::size_t>(w));
  }
  if (out.empty()) throw ConfigError("config: " + key + " wants at least one width");
  return out;
}

std::string join_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(w[i]);
  }
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("config " + path.string() + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config " + path.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section.empty()) {
      throw ConfigError("config " + path.string() + ":" + std::to_string(lineno) +
                        ": key outside any [section]");
    }
    cfg.apply(section + "." + key, value);
  }
  return cfg;
}

void ExperimentConfig::apply(const std::string& dotted_key, const std::string& value) {
  std::size_t dot = dotted_key.find('.');
  if (dot == std::string::npos) throw ConfigError("config: key '" + dotted_key + "' needs a section prefix");
  std::string section = dotted_key.substr(0, dot);
  std::string key = dotted_key.substr(dot + 1);
  const std::string& v = value;
  try {
    if (section == "env") {
      if (key == "name") env = envs::EnvSpec::preset(v);
      else if (key == "width") env.width = static_cast<int>(to_int(dotted_key, v));
      else if (key == "height") env.height = static_cast<int>(to_int(dotted_key, v));
      else if (key == "episode_cap") env.episode_cap = static_cast<int>(to_int(dotted_key, v));
      else if (key == "patrol_len") env.patrol_len = static_cast<int>(to_int(dotted_key, v));
      else throw ConfigError("config: unknown key '" + dotted_key + "'");
    } else if (section == "trainer") {
      if (key == "kind") trainer.kind = agent::agent_kind_from_name(v);
      else if (key == "gamma") trainer.gamma = to_double(dotted_key, v);
      else if (key == "lr") trainer.lr = to_double(dotted_key, v);
      else if (key == "batch") trainer.batch = static_cast<int>(to_int(dotted_key, v));
      else if (key == "capacity") trainer.capacity = static_cast<int>(to_int(dotted_key, v));
      else if (key == "sync_period") trainer.sync_period = static_cast<int>(to_int(dotted_key, v));
      else if (key == "steps") trainer.total_steps = to_int(dotted_key, v);
      else if (key == "learn_start") trainer.learn_start = to_int(dotted_key, v);
      else if (key == "eps_start") trainer.eps.start = to_double(dotted_key, v);
      else if (key == "eps_end") trainer.eps.end = to_double(dotted_key, v);
      else if (key == "eps_decay_steps") trainer.eps.decay_steps = to_int(dotted_key, v);
      else if (key == "hidden") trainer.hidden = to_widths(dotted_key, v);
      else if (key == "target_noise")
        trainer.target_noise = v == "resample" ? nets::TargetNoiseMode::Resample
                                               : nets::TargetNoiseMode::Frozen;
      else if (key == "noise_mode") trainer.eval_noise = agent::noise_mode_from_name(v);
      else throw ConfigError("config: unknown key '" + dotted_key + "'");
    } else if (section == "eval") {
      if (key == "cadence") trainer.eval_cadence = static_cast<int>(to_int(dotted_key, v));
      else if (key == "episodes") trainer.eval_episodes = static_cast<int>(to_int(dotted_key, v));
      else throw ConfigError("config: unknown key '" + dotted_key + "'");
    } else if (section == "attack") {
      if (key == "lambda") attack.lambda = to_double(dotted_key, v);
      else if (key == "loss") attack.loss = attacks::fgsm_loss_from_name(v);
      else if (key == "source") attack.source = v;
      else if (key == "attack_rate") attack.attack_rate = to_double(dotted_key, v);
      else if (key == "trigger_fraction") attack.trigger_fraction = to_double(dotted_key, v);
      else if (key == "adv_reward") attack.adv_reward = v;
      else if (key == "adv_policy_steps") attack.adv_policy_steps = to_int(dotted_key, v);
      else if (key == "replica_steps") attack.replica_steps = to_int(dotted_key, v);
      else if (key == "replica_train_every")
        attack.replica_train_every = static_cast<int>(to_int(dotted_key, v));
      else if (key == "replica_kind") attack.replica_kind = v;
      else if (key == "replica_hidden") attack.replica_hidden = to_widths(dotted_key, v);
      else throw ConfigError("config: unknown key '" + dotted_key + "'");
    } else if (section == "run") {
      if (key == "seeds") {
        seeds.clear();
        for (const std::string& tok : split_list(v)) {
          seeds.push_back(static_cast<std::uint64_t>(to_int(dotted_key, tok)));
        }
      } else if (key == "seed") {
        seeds = {static_cast<std::uint64_t>(to_int(dotted_key, v))};
      } else if (key == "out") {
        out_dir = v;
      } else if (key == "label") {
        run_label = v;
      } else if (key == "early_stop") {
        early_stop = to_bool(dotted_key, v);
      } else if (key == "early_stop_fraction") {
        early_stop_fraction = to_double(dotted_key, v);
      } else if (key == "envs") {
        suite_envs = split_list(v);
      } else {
        throw ConfigError("config: unknown key '" + dotted_key + "'");
      }
    } else {
      throw ConfigError("config: unknown section '" + section + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config: " + dotted_key + ": " + e.what());
  }
}

void ExperimentConfig::validate() const {
  try {
    env.validate();
    trainer.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (seeds.empty()) throw ConfigError("config: run.seeds must not be empty");
  if (attack.lambda < 0.0) throw ConfigError("config: attack.lambda must be >= 0");
  if (attack.source != "whitebox" && attack.source != "blackbox") {
    throw ConfigError("config: attack.source must be whitebox or blackbox");
  }
  if (attack.attack_rate < 0.0 || attack.attack_rate > 1.0) {
    throw ConfigError("config: attack.attack_rate must be in [0,1]");
  }
  if (attack.trigger_fraction < 0.0 || attack.trigger_fraction > 1.0) {
    throw ConfigError("config: attack.trigger_fraction must be in [0,1]");
  }
  if (attack.adv_reward != "negate" && attack.adv_reward.rfind("fixed:", 0) != 0) {
    throw ConfigError("config: attack.adv_reward must be 'negate' or 'fixed:<action>'");
  }
  for (const std::string& name : suite_envs) {
    envs::EnvSpec::preset(name);  // throws on unknown names
  }
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream out;
  out << "[env]\n";
  out << "name = " << env.name << "\n";
  out << "width = " << env.width << "\n";
  out << "height = " << env.height << "\n";
  out << "episode_cap = " << env.episode_cap << "\n";
  if (env.name == "grid_pursuit") out << "patrol_len = " << env.patrol_len << "\n";
  out << "\n[trainer]\n";
  out << "kind = " << agent::agent_kind_name(trainer.kind) << "\n";
  out << "gamma = " << fmt_double(trainer.gamma) << "\n";
  out << "lr = " << fmt_double(trainer.lr) << "\n";
  out << "batch = " << trainer.batch << "\n";
  out << "capacity = " << trainer.capacity << "\n";
  out << "sync_period = " << trainer.sync_period << "\n";
  out << "steps = " << trainer.total_steps << "\n";
  out << "learn_start = " << trainer.learn_start << "\n";
  out << "eps_start = " << fmt_double(trainer.eps.start) << "\n";
  out << "eps_end = " << fmt_double(trainer.eps.end) << "\n";
  out << "eps_decay_steps = " << trainer.eps.decay_steps << "\n";
  out << "hidden = " << join_widths(trainer.hidden) << "\n";
  out << "target_noise = "
      << (trainer.target_noise == nets::TargetNoiseMode::Frozen ? "frozen" : "resample") << "\n";
  out << "noise_mode = " << agent::noise_mode_name(trainer.eval_noise) << "\n";
  out << "\n[eval]\n";
  out << "cadence = " << trainer.eval_cadence << "\n";
  out << "episodes = " << trainer.eval_episodes << "\n";
  out << "\n[attack]\n";
  out << "lambda = " << fmt_double(attack.lambda) << "\n";
  out << "loss = " << attacks::fgsm_loss_name(attack.loss) << "\n";
  out << "source = " << attack.source << "\n";
  out << "attack_rate = " << fmt_double(attack.attack_rate) << "\n";
  out << "trigger_fraction = " << fmt_double(attack.trigger_fraction) << "\n";
  out << "adv_reward = " << attack.adv_reward << "\n";
  out << "adv_policy_steps = " << attack.adv_policy_steps << "\n";
  out << "replica_steps = " << attack.replica_steps << "\n";
  out << "replica_train_every = " << attack.replica_train_every << "\n";
  if (attack.replica_kind) out << "replica_kind = " << *attack.replica_kind << "\n";
  if (attack.replica_hidden) out << "replica_hidden = " << join_widths(*attack.replica_hidden) << "\n";
  out << "\n[run]\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  out << "\n";
  out << "out = " << out_dir.string() << "\n";
  if (!run_label.empty()) out << "label = " << run_label << "\n";
  out << "early_stop = " << (early_stop ? "true" : "false") << "\n";
  out << "early_stop_fraction = " << fmt_double(early_stop_fraction) << "\n";
  out << "envs = ";
  for (std::size_t i = 0; i < suite_envs.size(); ++i) out << (i ? "," : "") << suite_envs[i];
  out << "\n";
  return out.str();
}

std::uint64_t config_hash(const std::string& serialized) {
  return detail::fnv1a64(serialized);
}

}  // namespace noisyq::harness
