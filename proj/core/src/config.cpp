#include "quadrl/config.hpp"

#include "quadrl/errors.hpp"
#include "quadrl/trajectory_io.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace quadrl {

namespace {

struct Field {
  std::string section;
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;  ///< throws std::invalid_argument with a reason

  std::string name() const { return section + "." + key; }
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw std::invalid_argument("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

template <class Int>
Int parse_integer(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  Int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw std::invalid_argument("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::string parse_string(std::string_view s) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') {
    throw std::invalid_argument("expected a quoted string, got '" + std::string(s) + "'");
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\' && i + 2 < s.size()) {
      const char c = s[++i];
      out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

std::vector<std::string_view> parse_array(std::string_view s) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw std::invalid_argument("expected an array like [1, 2], got '" + std::string(s) + "'");
  }
  std::vector<std::string_view> items;
  s = trim(s.substr(1, s.size() - 2));
  if (s.empty()) return items;
  while (true) {
    const auto comma = s.find(',');
    items.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
    if (trim(s).empty()) break;  // trailing comma
  }
  return items;
}

std::vector<double> parse_reals(std::string_view s, std::size_t expected) {
  const auto items = parse_array(s);
  if (items.size() != expected) {
    throw std::invalid_argument("expected " + std::to_string(expected) + " numbers, got " +
                                std::to_string(items.size()));
  }
  std::vector<double> out;
  for (auto item : items) out.push_back(parse_real(item));
  return out;
}

template <class Vec>
std::string format_reals(const Vec& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_double(v.data()[i]);
  }
  return out + "]";
}

// Builders. `ref` maps a RunConfig to the field it owns.
template <class Ref>
Field real(std::string section, std::string key, std::string doc, Ref ref) {
  return {std::move(section), std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) { ref(c) = parse_real(v); }};
}

template <class Ref>
Field integer(std::string section, std::string key, std::string doc, Ref ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<RunConfig&>()))>;
  return {std::move(section), std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) { ref(c) = parse_integer<T>(v); }};
}

template <class Ref>
Field text(std::string section, std::string key, std::string doc, Ref ref) {
  return {std::move(section), std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return quote(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) { ref(c) = parse_string(v); }};
}

template <class Ref>
Field vector3(std::string section, std::string key, std::string doc, Ref ref) {
  return {std::move(section), std::move(key), std::move(doc),
          [ref](const RunConfig& c) { return format_reals(ref(const_cast<RunConfig&>(c))); },
          [ref](RunConfig& c, std::string_view v) {
            const auto xs = parse_reals(v, 3);
            ref(c) = Vec3(xs[0], xs[1], xs[2]);
          }};
}

template <class Ref>
Field hidden_layers(std::string section, std::string key, std::string doc, Ref ref, int out_dim) {
  return {std::move(section), std::move(key), std::move(doc),
          [ref](const RunConfig& c) {
            const auto& layers = ref(const_cast<RunConfig&>(c));
            std::string out = "[";
            for (std::size_t i = 1; i + 1 < layers.size(); ++i) {
              if (i > 1) out += ", ";
              out += std::to_string(layers[i]);
            }
            return out + "]";
          },
          [ref, out_dim](RunConfig& c, std::string_view v) {
            std::vector<int> layers{kObservationDim};
            for (auto item : parse_array(v)) {
              const int n = parse_integer<int>(item);
              if (n < 1) throw std::invalid_argument("layer widths must be positive");
              layers.push_back(n);
            }
            layers.push_back(out_dim);
            ref(c) = std::move(layers);
          }};
}

std::vector<Field> build_fields() {
  std::vector<Field> f;
  // Vehicle.
  f.push_back(real("quad", "mass", "kg; published vehicle value", [](RunConfig& c) -> auto& { return c.train.task.quad.mass; }));
  f.push_back(vector3("quad", "inertia", "kg m^2, principal axes; published vehicle value",
                      [](RunConfig& c) -> auto& { return c.train.task.quad.inertia; }));
  f.push_back(real("quad", "arm_length", "m, rotor centre to body centre; design decision",
                   [](RunConfig& c) -> auto& { return c.train.task.quad.arm_length; }));
  f.push_back(real("quad", "torque_coefficient", "m, yaw torque per newton of rotor thrust; design decision",
                   [](RunConfig& c) -> auto& { return c.train.task.quad.torque_coefficient; }));
  f.push_back(real("quad", "gravity", "m/s^2", [](RunConfig& c) -> auto& { return c.train.task.quad.gravity; }));
  f.push_back(real("quad", "dt", "s, integration step; published value", [](RunConfig& c) -> auto& { return c.train.task.quad.dt; }));
  f.push_back(real("quad", "max_angular_speed", "rad/s; faster spin counts as divergence; design decision",
                   [](RunConfig& c) -> auto& { return c.train.task.quad.max_angular_speed; }));
  // Inner-loop attitude controller.
  f.push_back(vector3("control", "kp", "attitude PD proportional gains per body axis; published value",
                      [](RunConfig& c) -> auto& { return c.train.task.gains.kp; }));
  f.push_back(vector3("control", "kd", "attitude PD derivative gains per body axis; published value",
                      [](RunConfig& c) -> auto& { return c.train.task.gains.kd; }));
  f.push_back(real("control", "action_scale", "N per unit of policy output; design decision",
                   [](RunConfig& c) -> auto& { return c.train.task.action_scale; }));
  // Observation scaling.
  f.push_back(real("observation", "position_scale", "1/m; published value",
                   [](RunConfig& c) -> auto& { return c.train.task.scales.position; }));
  f.push_back(real("observation", "velocity_scale", "s/m; published value",
                   [](RunConfig& c) -> auto& { return c.train.task.scales.velocity; }));
  f.push_back(real("observation", "angular_velocity_scale", "s/rad; published value",
                   [](RunConfig& c) -> auto& { return c.train.task.scales.angular_velocity; }));
  // Cost.
  f.push_back(real("cost", "position", "weight on |p|; published value", [](RunConfig& c) -> auto& { return c.train.task.cost.position; }));
  f.push_back(real("cost", "action", "weight on |a|; published value", [](RunConfig& c) -> auto& { return c.train.task.cost.action; }));
  f.push_back(real("cost", "angular_velocity", "weight on |w|; published value",
                   [](RunConfig& c) -> auto& { return c.train.task.cost.angular_velocity; }));
  f.push_back(real("cost", "velocity", "weight on |v|; published value", [](RunConfig& c) -> auto& { return c.train.task.cost.velocity; }));
  f.push_back(real("cost", "discount", "gamma; published value", [](RunConfig& c) -> auto& { return c.train.task.cost.discount; }));
  // Initial states.
  f.push_back(real("init", "position_bound", "m, uniform box half-width; published value",
                   [](RunConfig& c) -> auto& { return c.train.task.init.position_bound; }));
  f.push_back(real("init", "velocity_bound", "m/s; published value",
                   [](RunConfig& c) -> auto& { return c.train.task.init.velocity_bound; }));
  f.push_back(real("init", "angular_velocity_bound", "rad/s; published value",
                   [](RunConfig& c) -> auto& { return c.train.task.init.angular_velocity_bound; }));
  f.push_back(vector3("init", "center", "m, box centre", [](RunConfig& c) -> auto& { return c.train.task.init.center; }));
  // Exploration.
  f.push_back(integer("rollout", "initial_count", "on-policy trajectories per iteration; published value",
                      [](RunConfig& c) -> auto& { return c.train.rollout.initial_count; }));
  f.push_back(integer("rollout", "initial_length", "steps; design decision",
                      [](RunConfig& c) -> auto& { return c.train.rollout.initial_length; }));
  f.push_back(integer("rollout", "branch_count", "junction/branch pairs per iteration; published value",
                      [](RunConfig& c) -> auto& { return c.train.rollout.branch_count; }));
  f.push_back(integer("rollout", "branch_length", "steps; design decision",
                      [](RunConfig& c) -> auto& { return c.train.rollout.branch_length; }));
  f.push_back(integer("rollout", "noise_depth", "noisy steps per junction; published value",
                      [](RunConfig& c) -> auto& { return c.train.rollout.noise.depth; }));
  f.push_back({"rollout", "noise_covariance", "N^2, 4x4 row-major, symmetric positive-definite; design decision",
               [](const RunConfig& c) { return format_reals(c.train.rollout.noise.covariance); },
               [](RunConfig& c, std::string_view v) {
                 const auto xs = parse_reals(v, 16);
                 for (int i = 0; i < 16; ++i) c.train.rollout.noise.covariance(i / 4, i % 4) = xs[static_cast<std::size_t>(i)];
               }});
  // Value fitting.
  f.push_back(integer("value", "max_iterations", "design decision",
                      [](RunConfig& c) -> auto& { return c.train.value.max_iterations; }));
  f.push_back(real("value", "loss_threshold", "mean Huber loss to stop at; design decision",
                   [](RunConfig& c) -> auto& { return c.train.value.loss_threshold; }));
  f.push_back(real("value", "step_size", "Adam learning rate; design decision",
                   [](RunConfig& c) -> auto& { return c.train.value.step_size; }));
  f.push_back(real("value", "huber_delta", "design decision", [](RunConfig& c) -> auto& { return c.train.value.huber.delta; }));
  f.push_back(integer("value", "sample_cap", "targets per fit, subsampled above this; design decision",
                      [](RunConfig& c) -> auto& { return c.train.value.sample_cap; }));
  // Policy update.
  f.push_back(real("policy", "step_size", "alpha; design decision",
                   [](RunConfig& c) -> auto& { return c.train.policy.step_size; }));
  f.push_back(real("policy", "trust_region", "delta, squared Mahalanobis units; design decision",
                   [](RunConfig& c) -> auto& { return c.train.policy.trust_region; }));
  f.push_back({"policy", "solver", "\"svd\" or \"cg\"",
               [](const RunConfig& c) { return quote(to_string(c.train.policy.solver)); },
               [](RunConfig& c, std::string_view v) {
                 try {
                   c.train.policy.solver = parse_solver(parse_string(v));
                 } catch (const ConfigError& e) {
                   throw std::invalid_argument(e.what());
                 }
               }});
  f.push_back(integer("policy", "cg_iterations", "published value",
                      [](RunConfig& c) -> auto& { return c.train.policy.cg_iterations; }));
  // Networks.
  f.push_back(hidden_layers("network", "policy_hidden", "tanh hidden widths; published value",
                            [](RunConfig& c) -> auto& { return c.train.policy_layers; }, kActionDim));
  f.push_back(hidden_layers("network", "value_hidden", "tanh hidden widths; published value",
                            [](RunConfig& c) -> auto& { return c.train.value_layers; }, 1));
  // Training loop.
  f.push_back(integer("train", "iterations", "", [](RunConfig& c) -> auto& { return c.train.iterations; }));
  f.push_back(integer("train", "eval_rollouts", "fixed evaluation starts per iteration",
                      [](RunConfig& c) -> auto& { return c.train.eval_rollouts; }));
  f.push_back(integer("train", "eval_length", "steps", [](RunConfig& c) -> auto& { return c.train.eval_length; }));
  f.push_back(integer("train", "seed", "", [](RunConfig& c) -> auto& { return c.train.seed; }));
  f.push_back(integer("train", "plateau_patience", "0 disables early stopping",
                      [](RunConfig& c) -> auto& { return c.train.plateau_patience; }));
  f.push_back(real("train", "plateau_tolerance", "", [](RunConfig& c) -> auto& { return c.train.plateau_tolerance; }));
  f.push_back(integer("train", "workers", "threads; 0 = all cores", [](RunConfig& c) -> auto& { return c.train.workers; }));
  f.push_back(text("train", "output_dir", "", [](RunConfig& c) -> auto& { return c.output_dir; }));
  // Evaluation.
  f.push_back(integer("recovery", "episodes", "", [](RunConfig& c) -> auto& { return c.recovery.episodes; }));
  f.push_back(real("recovery", "altitude", "m above the ground plane; design decision",
                   [](RunConfig& c) -> auto& { return c.recovery.altitude; }));
  f.push_back(real("recovery", "duration", "s; design decision", [](RunConfig& c) -> auto& { return c.recovery.duration; }));
  f.push_back(integer("recovery", "seed", "", [](RunConfig& c) -> auto& { return c.recovery.seed; }));
  f.push_back(real("waypoint", "side", "m; published value", [](RunConfig& c) -> auto& { return c.waypoint.side; }));
  f.push_back(real("waypoint", "dwell", "s per corner; design decision", [](RunConfig& c) -> auto& { return c.waypoint.dwell; }));
  f.push_back(real("waypoint", "steady_window", "s at the end of each dwell; design decision",
                   [](RunConfig& c) -> auto& { return c.waypoint.steady_window; }));
  f.push_back(real("waypoint", "altitude", "m", [](RunConfig& c) -> auto& { return c.waypoint.altitude; }));
  f.push_back(integer("bench", "inference_repetitions", "",
                      [](RunConfig& c) -> auto& { return c.bench.inference_repetitions; }));
  f.push_back(integer("bench", "solver_problems", "", [](RunConfig& c) -> auto& { return c.bench.solver_problems; }));
  f.push_back(integer("bench", "solver_repetitions", "", [](RunConfig& c) -> auto& { return c.bench.solver_repetitions; }));
  f.push_back(integer("bench", "seed", "", [](RunConfig& c) -> auto& { return c.bench.seed; }));
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = build_fields();
  return all;
}

const Field& find_field(const std::string& name) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const auto& f : fields()) m[f.name()] = &f;
    return m;
  }();
  const auto it = index.find(name);
  if (it == index.end()) throw ConfigError("unknown config key '" + name + "'");
  return *it->second;
}

void assign(RunConfig& config, const std::string& name, std::string_view value, const std::string& where) {
  const Field& f = find_field(name);
  try {
    f.set(config, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + "config key '" + name + "': " + e.what());
  }
}

// Drops a trailing comment, ignoring '#' inside quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back({f.name(), f.doc});
    return k;
  }();
  return keys;
}

void apply_config_text(RunConfig& config, std::string_view text, const std::string& source) {
  std::string section;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (section.empty()) throw ConfigError(where + "key '" + key + "' outside a section");
    try {
      assign(config, section + "." + key, line.substr(eq + 1), where);
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      throw ConfigError(msg.rfind(where, 0) == 0 ? msg : where + msg);
    }
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig config;
  apply_config_text(config, buffer.str(), path.string());
  return config;
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form section.key=value");
  }
  std::string name(trim(assignment.substr(0, eq)));
  auto value = trim(assignment.substr(eq + 1));
  // Bare words are accepted for string keys on the command line.
  std::string quoted;
  if (!value.empty() && value.front() != '"' && value.front() != '[') {
    const std::string current = find_field(name).get(config);
    if (!current.empty() && current.front() == '"') {
      quoted = quote(std::string(value));
      value = quoted;
    }
  }
  assign(config, name, value, "");
}

std::string config_value(const RunConfig& config, const std::string& key) { return find_field(key).get(config); }

std::string to_config_text(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config);
    if (!f.doc.empty()) out += "  # " + f.doc;
    out += '\n';
  }
  return out;
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_config_text(config);
}

}  // namespace quadrl
