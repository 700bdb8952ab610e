#include "noisyq/env.hpp"

#include <algorithm>
#include <stdexcept>

#include "noisyq/rng.hpp"

namespace noisyq::envs {

int EnvSpec::action_count() const {
  if (name == "grid_pursuit") return 4;
  if (name == "catcher") return 3;
  throw std::invalid_argument("unknown environment '" + name + "'");
}

void EnvSpec::validate() const {
  action_count();  // known name
  if (width < 4 || height < 4) {
    throw std::invalid_argument("EnvSpec: width and height must be at least 4");
  }
  if (episode_cap < 10) {
    throw std::invalid_argument("EnvSpec: episode cap must be at least 10");
  }
  if (frames != 2) {
    throw std::invalid_argument("EnvSpec: only 2 stacked frames are supported");
  }
  if (name == "grid_pursuit") {
    // Patrol ring is a rw x rh rectangle boundary: 2(rw+rh) - 4 cells.
    if (patrol_len < 8 || patrol_len % 4 != 0) {
      throw std::invalid_argument("EnvSpec: patrol_len must be a multiple of 4, at least 8");
    }
    int half = patrol_len / 2 + 2;  // rw + rh
    int rw = half / 2;
    int rh = half - rw;
    if (rw > width || rh > height) {
      throw std::invalid_argument("EnvSpec: patrol ring does not fit the grid");
    }
  }
}

EnvSpec EnvSpec::preset(const std::string& name) {
  EnvSpec s;
  s.name = name;
  if (name == "grid_pursuit") {
    s.width = 8;
    s.height = 8;
    s.episode_cap = 100;
    s.patrol_len = 12;
  } else if (name == "catcher") {
    s.width = 8;
    s.height = 10;
    s.episode_cap = 10 * (s.height - 1);  // ten drops' worth of fall steps
  } else {
    throw std::invalid_argument("unknown environment '" + name + "'");
  }
  return s;
}

void Env::require_live(int action) const {
  if (done_) throw std::logic_error("Env::step called on a terminal episode; reset first");
  if (action < 0 || action >= spec_.action_count()) {
    throw std::invalid_argument("Env::step: invalid action id " + std::to_string(action));
  }
}

namespace {

constexpr double kAgentIntensity = 1.0;
constexpr double kPreyIntensity = 0.5;

/// Agent chases a prey that patrols a fixed rectangular ring. Catching the
/// prey (co-location after both move) pays +1 and ends the episode; every
/// other step pays -0.01.
class GridPursuit final : public Env {
 public:
  explicit GridPursuit(EnvSpec spec) : Env(std::move(spec)) {
    build_patrol();
  }

  Observation reset(std::uint64_t episode_seed) override {
    Rng rng(episode_seed, "episode");
    phase_ = rng.uniform_int(static_cast<int>(patrol_.size()));
    // Both movers flip checkerboard parity every step, so only starts with
    // matching parity are catchable; initial states are drawn from those.
    int prey = patrol_[phase_];
    int prey_parity = (prey / spec_.width + prey % spec_.width) % 2;
    do {
      agent_ = rng.uniform_int(spec_.width * spec_.height);
    } while (agent_ == prey ||
             (agent_ / spec_.width + agent_ % spec_.width) % 2 != prey_parity);
    steps_ = 0;
    done_ = false;
    frame(last_frame_);
    return stacked();
  }

  StepResult step(int action) override {
    require_live(action);
    Observation prev = current_frame_storage();
    CompactTransition t = model(pack(agent_, phase_), action);
    unpack(t.next_state, agent_, phase_);
    ++steps_;
    bool capped = steps_ >= spec_.episode_cap;
    StepResult out;
    out.reward = t.reward;
    out.terminal = t.terminal || capped;
    done_ = out.terminal;
    last_frame_ = prev;
    out.obs = stacked();
    return out;
  }

  int state_count() const override {
    return spec_.width * spec_.height * static_cast<int>(patrol_.size());
  }

  int current_state() const override { return pack(agent_, phase_); }

  bool state_terminal(int state) const override {
    int agent, phase;
    unpack(state, agent, phase);
    return agent == patrol_[phase];
  }

  CompactTransition model(int state, int action) const override {
    int agent, phase;
    unpack(state, agent, phase);
    int r = agent / spec_.width;
    int c = agent % spec_.width;
    switch (action) {
      case 0: r = std::max(0, r - 1); break;                 // up
      case 1: r = std::min(spec_.height - 1, r + 1); break;  // down
      case 2: c = std::max(0, c - 1); break;                 // left
      case 3: c = std::min(spec_.width - 1, c + 1); break;   // right
      default: throw std::invalid_argument("grid_pursuit: invalid action");
    }
    int next_agent = r * spec_.width + c;
    int next_phase = (phase + 1) % static_cast<int>(patrol_.size());
    bool caught = next_agent == patrol_[next_phase];
    CompactTransition t;
    t.next_state = pack(next_agent, next_phase);
    t.reward = caught ? 1.0 : -0.01;
    t.terminal = caught;
    return t;
  }

  Observation render_state(int state) const override {
    int agent, phase;
    unpack(state, agent, phase);
    std::vector<double> f(static_cast<std::size_t>(spec_.width) * spec_.height, 0.0);
    f[patrol_[phase]] = kPreyIntensity;
    f[agent] = kAgentIntensity;  // agent drawn on top when co-located
    Observation obs;
    obs.reserve(f.size() * 2);
    obs.insert(obs.end(), f.begin(), f.end());
    obs.insert(obs.end(), f.begin(), f.end());
    return obs;
  }

  int decode_frame(const double* f) const override {
    int agent = -1, prey = -1;
    int cells = spec_.width * spec_.height;
    for (int i = 0; i < cells; ++i) {
      if (f[i] == kAgentIntensity) agent = i;
      else if (f[i] == kPreyIntensity) prey = i;
    }
    if (agent < 0 || prey < 0) {
      throw std::invalid_argument("grid_pursuit: frame does not decode to a live state");
    }
    return pack(agent, phase_of_cell_.at(prey));
  }

 private:
  void build_patrol() {
    int half = spec_.patrol_len / 2 + 2;
    int rw = half / 2;
    int rh = half - rw;
    int r0 = (spec_.height - rh) / 2;
    int c0 = (spec_.width - rw) / 2;
    // Clockwise boundary walk starting at the top-left corner.
    for (int c = c0; c < c0 + rw; ++c) patrol_.push_back(r0 * spec_.width + c);
    for (int r = r0 + 1; r < r0 + rh; ++r) patrol_.push_back(r * spec_.width + (c0 + rw - 1));
    for (int c = c0 + rw - 2; c >= c0; --c) patrol_.push_back((r0 + rh - 1) * spec_.width + c);
    for (int r = r0 + rh - 2; r > r0; --r) patrol_.push_back(r * spec_.width + c0);
    phase_of_cell_.assign(static_cast<std::size_t>(spec_.width) * spec_.height, -1);
    for (std::size_t p = 0; p < patrol_.size(); ++p) phase_of_cell_[patrol_[p]] = static_cast<int>(p);
  }

  int pack(int agent, int phase) const {
    return agent * static_cast<int>(patrol_.size()) + phase;
  }
  void unpack(int state, int& agent, int& phase) const {
    int len = static_cast<int>(patrol_.size());
    agent = state / len;
    phase = state % len;
  }

  void frame(std::vector<double>& f) const {
    f.assign(static_cast<std::size_t>(spec_.width) * spec_.height, 0.0);
    f[patrol_[phase_]] = kPreyIntensity;
    f[agent_] = kAgentIntensity;
  }
  std::vector<double> current_frame_storage() const {
    std::vector<double> f;
    frame(f);
    return f;
  }
  Observation stacked() const {
    std::vector<double> cur;
    frame(cur);
    Observation obs;
    obs.reserve(cur.size() * 2);
    obs.insert(obs.end(), last_frame_.begin(), last_frame_.end());
    obs.insert(obs.end(), cur.begin(), cur.end());
    return obs;
  }

  std::vector<int> patrol_;
  std::vector<int> phase_of_cell_;
  std::vector<double> last_frame_;
  int agent_ = 0;
  int phase_ = 0;
};

/// One object falls from the top row; the paddle on the bottom row moves
/// left/stay/right to catch it. Catch pays +1, miss pays -1, both end the
/// episode.
class Catcher final : public Env {
 public:
  explicit Catcher(EnvSpec spec) : Env(std::move(spec)) {}

  Observation reset(std::uint64_t episode_seed) override {
    Rng rng(episode_seed, "episode");
    obj_row_ = 0;
    obj_col_ = rng.uniform_int(spec_.width);
    paddle_ = rng.uniform_int(spec_.width);
    steps_ = 0;
    done_ = false;
    frame(last_frame_);
    return stacked();
  }

  StepResult step(int action) override {
    require_live(action);
    Observation prev = current_frame_storage();
    CompactTransition t = model(current_state(), action);
    unpack(t.next_state, obj_row_, obj_col_, paddle_);
    ++steps_;
    bool capped = steps_ >= spec_.episode_cap;
    StepResult out;
    out.reward = t.reward;
    out.terminal = t.terminal || capped;
    done_ = out.terminal;
    last_frame_ = prev;
    out.obs = stacked();
    return out;
  }

  int state_count() const override { return spec_.height * spec_.width * spec_.width; }

  int current_state() const override { return pack(obj_row_, obj_col_, paddle_); }

  bool state_terminal(int state) const override {
    int orow, ocol, pad;
    unpack(state, orow, ocol, pad);
    return orow == spec_.height - 1;
  }

  CompactTransition model(int state, int action) const override {
    int orow, ocol, pad;
    unpack(state, orow, ocol, pad);
    switch (action) {
      case 0: pad = std::max(0, pad - 1); break;
      case 1: break;
      case 2: pad = std::min(spec_.width - 1, pad + 1); break;
      default: throw std::invalid_argument("catcher: invalid action");
    }
    int next_row = orow + 1;
    CompactTransition t;
    t.next_state = pack(next_row, ocol, pad);
    if (next_row == spec_.height - 1) {
      t.reward = (ocol == pad) ? 1.0 : -1.0;
      t.terminal = true;
    } else {
      t.reward = 0.0;
      t.terminal = false;
    }
    return t;
  }

  Observation render_state(int state) const override {
    int orow, ocol, pad;
    unpack(state, orow, ocol, pad);
    std::vector<double> f(static_cast<std::size_t>(spec_.width) * spec_.height, 0.0);
    f[orow * spec_.width + ocol] = kPreyIntensity;
    f[(spec_.height - 1) * spec_.width + pad] = kAgentIntensity;
    Observation obs;
    obs.reserve(f.size() * 2);
    obs.insert(obs.end(), f.begin(), f.end());
    obs.insert(obs.end(), f.begin(), f.end());
    return obs;
  }

  int decode_frame(const double* f) const override {
    int obj = -1, pad = -1;
    int cells = spec_.width * spec_.height;
    for (int i = 0; i < cells; ++i) {
      if (f[i] == kAgentIntensity) pad = i;
      else if (f[i] == kPreyIntensity) obj = i;
    }
    if (obj < 0 || pad < 0) {
      throw std::invalid_argument("catcher: frame does not decode to a live state");
    }
    return pack(obj / spec_.width, obj % spec_.width, pad % spec_.width);
  }

 private:
  int pack(int orow, int ocol, int pad) const {
    return (orow * spec_.width + ocol) * spec_.width + pad;
  }
  void unpack(int state, int& orow, int& ocol, int& pad) const {
    pad = state % spec_.width;
    int oc = state / spec_.width;
    ocol = oc % spec_.width;
    orow = oc / spec_.width;
  }

  void frame(std::vector<double>& f) const {
    f.assign(static_cast<std::size_t>(spec_.width) * spec_.height, 0.0);
    f[obj_row_ * spec_.width + obj_col_] = kPreyIntensity;
    f[(spec_.height - 1) * spec_.width + paddle_] = kAgentIntensity;
  }
  std::vector<double> current_frame_storage() const {
    std::vector<double> f;
    frame(f);
    return f;
  }
  Observation stacked() const {
    std::vector<double> cur;
    frame(cur);
    Observation obs;
    obs.reserve(cur.size() * 2);
    obs.insert(obs.end(), last_frame_.begin(), last_frame_.end());
    obs.insert(obs.end(), cur.begin(), cur.end());
    return obs;
  }

  std::vector<double> last_frame_;
  int obj_row_ = 0;
  int obj_col_ = 0;
  int paddle_ = 0;
};

}  // namespace

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
  if (spec.name == "grid_pursuit") return std::make_unique<GridPursuit>(spec);
  if (spec.name == "catcher") return std::make_unique<Catcher>(spec);
  throw std::invalid_argument("unknown environment '" + spec.name + "'");
}

}  // namespace noisyq::envs
