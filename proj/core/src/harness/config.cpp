#include "onepass/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace onepass::harness {
namespace {

struct SettingInfo {
  Setting setting;
  std::string_view name;
  std::string_view label;
};

constexpr SettingInfo kSettings[] = {
    {Setting::random, "random", "Random"},
    {Setting::random_xlr, "random_xlr", "Random xLR"},
    {Setting::random_3batched, "random_3batched", "Random 3-batched"},
    {Setting::lorraine, "lorraine", "Lorraine"},
    {Setting::baydin, "baydin", "Baydin"},
    {Setting::ours_wd_lr, "ours_wd_lr", "Ours WD+LR"},
    {Setting::ours_wd_lr_m, "ours_wd_lr_m", "Ours WD+LR+M"},
    {Setting::ours_wd_hdlr_m, "ours_wd_hdlr_m", "Ours WD+HDLR+M"},
    {Setting::diff_through_opt, "diff_through_opt", "Diff-through-Opt"},
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError(fmt::format("{}: '{}' is not {}", key, value, expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    bad_value(key, s, std::is_floating_point_v<T> ? "a number" : "a non-negative integer");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, s, "a boolean");
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view s) {
  std::vector<T> out;
  for (auto item : split_list(s)) out.push_back(parse_number<T>(key, item));
  return out;
}

Range parse_range(std::string_view key, std::string_view s) {
  const auto v = parse_list<double>(key, s);
  if (v.size() != 2) bad_value(key, s, "a 'min,max' pair");
  return {v[0], v[1]};
}

std::string show(double v) { return fmt::format("{}", v); }

template <class T>
std::string show_list(const std::vector<T>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

ConfigField string_field(std::string key, std::string help, std::string ExperimentConfig::*member) {
  return {key, std::move(help), [member](ExperimentConfig& c, std::string_view v) { c.*member = std::string(trim(v)); },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

template <class T>
ConfigField number_field(std::string key, std::string help, T ExperimentConfig::*member) {
  return {key, std::move(help),
          [key, member](ExperimentConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) { return fmt::format("{}", c.*member); }};
}

ConfigField range_field(std::string key, std::string help, Range InitRanges::*member) {
  return {key, std::move(help),
          [key, member](ExperimentConfig& c, std::string_view v) { c.ranges.*member = parse_range(key, v); },
          [member](const ExperimentConfig& c) {
            return fmt::format("{},{}", show((c.ranges.*member).min), show((c.ranges.*member).max));
          }};
}

ConfigField meta_field(std::string key, std::string help, double update::AdamConfig::*member) {
  return {key, std::move(help),
          [key, member](ExperimentConfig& c, std::string_view v) { c.meta.*member = parse_number<double>(key, v); },
          [member](const ExperimentConfig& c) { return show(c.meta.*member); }};
}

std::vector<ConfigField> make_fields() {
  using C = ExperimentConfig;
  std::vector<ConfigField> f;
  f.push_back(string_field("dataset", "energy_like, idx, or a CSV path", &C::dataset));
  f.push_back(string_field("images", "IDX image file (dataset = idx)", &C::images));
  f.push_back(string_field("labels", "IDX label file (dataset = idx)", &C::labels));
  f.push_back(string_field("target", "CSV target column name; empty = last column", &C::target));
  f.push_back({"task", "regression or classification",
               [](C& c, std::string_view v) {
                 v = trim(v);
                 if (v == "regression") {
                   c.task = data::Task::regression;
                 } else if (v == "classification") {
                   c.task = data::Task::classification;
                 } else {
                   bad_value("task", v, "regression or classification");
                 }
               },
               [](const C& c) { return std::string(c.task == data::Task::regression ? "regression" : "classification"); }});
  f.push_back(number_field("data_seed", "noise seed of the built-in dataset", &C::data_seed));
  f.push_back({"split", "train,val,test fractions; empty = 0.72,0.18,0.10 for energy_like, else 0.6,0.2,0.2",
               [](C& c, std::string_view v) {
                 c.split = parse_list<double>("split", v);
                 if (!c.split.empty() && c.split.size() != 3) bad_value("split", v, "three fractions");
               },
               [](const C& c) { return show_list(c.split); }});
  f.push_back(number_field("split_seed", "seed of the train/val/test permutation", &C::split_seed));
  f.push_back({"hidden", "hidden layer widths; empty = linear model",
               [](C& c, std::string_view v) { c.hidden = parse_list<std::size_t>("hidden", v); },
               [](const C& c) { return show_list(c.hidden); }});
  f.push_back({"setting", "comma list of settings",
               [](C& c, std::string_view v) {
                 std::vector<Setting> out;
                 for (auto name : split_list(v)) {
                   if (name == "all") {
                     out = all_settings();
                     continue;
                   }
                   const auto s = parse_setting(name);
                   if (!s) bad_value("setting", name, "a known setting");
                   out.push_back(*s);
                 }
                 if (out.empty()) bad_value("setting", v, "a non-empty list");
                 c.settings = out;
               },
               [](const C& c) {
                 std::vector<std::string_view> names;
                 for (Setting s : c.settings) names.push_back(setting_name(s));
                 return fmt::format("{}", fmt::join(names, ","));
               }});
  f.push_back(number_field("epochs", "passes over the training portion", &C::epochs));
  f.push_back(number_field("steps", "total weight steps; overrides epochs when > 0", &C::steps));
  f.push_back(number_field("batch_size", "rows per weight step; 0 = full batch", &C::batch_size));
  f.push_back(number_field("T", "weight steps per hyperparameter update", &C::T));
  f.push_back(number_field("i", "look-back distance (Neumann iterations)", &C::i));
  f.push_back(number_field("window", "exact-unroll window; 0 = i, clamped to [1, T]", &C::window));
  f.push_back(number_field("n_trials", "trials per setting", &C::n_trials));
  f.push_back(number_field("master_seed", "seed all trial seeds derive from", &C::master_seed));
  f.push_back(meta_field("kappa", "meta learning rate", &update::AdamConfig::kappa));
  f.push_back(meta_field("beta1", "Adam beta1", &update::AdamConfig::beta1));
  f.push_back(meta_field("beta2", "Adam beta2", &update::AdamConfig::beta2));
  f.push_back(meta_field("eps", "Adam epsilon", &update::AdamConfig::eps));
  f.push_back({"clip_lr", "clip learning rates to [1e-10, 1] after each meta step",
               [](C& c, std::string_view v) { c.clip_lr = parse_bool("clip_lr", v); },
               [](const C& c) { return std::string(c.clip_lr ? "true" : "false"); }});
  f.push_back(range_field("lr_range", "log10 learning-rate initialisation range", &InitRanges::log10_lr));
  f.push_back(range_field("wd_range", "log10 weight-decay initialisation range", &InitRanges::log10_wd));
  f.push_back(range_field("momentum_range", "natural momentum initialisation range", &InitRanges::momentum));
  f.push_back(range_field("lr_multiplier_range", "xLR multiplier range", &InitRanges::lr_multiplier));
  f.push_back(number_field("n_boot", "bootstrap resamples", &C::n_boot));
  f.push_back(number_field("outlier_threshold", "classification losses above this count as NaN in statistics",
                           &C::outlier_threshold));
  f.push_back({"grid_T", "sensitivity grid update intervals",
               [](C& c, std::string_view v) { c.grid_T = parse_list<std::size_t>("grid_T", v); },
               [](const C& c) { return show_list(c.grid_T); }});
  f.push_back({"grid_i", "sensitivity grid look-back distances",
               [](C& c, std::string_view v) { c.grid_i = parse_list<std::size_t>("grid_i", v); },
               [](const C& c) { return show_list(c.grid_i); }});
  f.push_back(number_field("hyper_updates", "hyperparameter updates per grid trial", &C::hyper_updates));
  f.push_back({"grid_setting", "optimising setting run in every grid cell",
               [](C& c, std::string_view v) {
                 const auto s = parse_setting(trim(v));
                 if (!s || is_random(*s)) bad_value("grid_setting", v, "a non-random setting");
                 c.grid_setting = *s;
               },
               [](const C& c) { return std::string(setting_name(c.grid_setting)); }});
  f.push_back(number_field("check_warmup", "weight steps before the accuracy check; 0 = T", &C::check_warmup));
  f.push_back(number_field("check_max_params", "largest model the dense oracles accept", &C::check_max_params));
  f.push_back(number_field("check_tolerance_dense", "fail when Neumann vs dense series error exceeds this (0 = off)",
                           &C::check_tolerance_dense));
  f.push_back(number_field("check_tolerance_exact", "fail when Neumann vs exact unroll error exceeds this (0 = off)",
                           &C::check_tolerance_exact));
  f.push_back(number_field("check_tolerance_solve", "fail when Neumann vs dense solve error exceeds this (0 = off)",
                           &C::check_tolerance_solve));
  return f;
}

}  // namespace

std::string_view setting_name(Setting s) {
  for (const auto& info : kSettings)
    if (info.setting == s) return info.name;
  return "?";
}

std::string_view setting_label(Setting s) {
  for (const auto& info : kSettings)
    if (info.setting == s) return info.label;
  return "?";
}

std::optional<Setting> parse_setting(std::string_view name) {
  for (const auto& info : kSettings)
    if (info.name == name) return info.setting;
  return std::nullopt;
}

const std::vector<Setting>& all_settings() {
  static const std::vector<Setting> all = [] {
    std::vector<Setting> v;
    for (const auto& info : kSettings) v.push_back(info.setting);
    return v;
  }();
  return all;
}

bool is_random(Setting s) {
  return s == Setting::random || s == Setting::random_xlr || s == Setting::random_3batched;
}

data::Fractions ExperimentConfig::fractions() const {
  if (split.size() == 3) return {split[0], split[1], split[2]};
  if (dataset == "energy_like") return {0.72, 0.18, 0.10};
  return {0.6, 0.2, 0.2};
}

std::size_t ExperimentConfig::total_steps(std::size_t n_train) const {
  if (steps > 0) return steps;
  const std::size_t b = batch_size == 0 ? n_train : std::min(batch_size, n_train);
  return epochs * ((n_train + b - 1) / b);
}

std::size_t ExperimentConfig::unroll_window() const { return std::clamp<std::size_t>(window == 0 ? i : window, 1, T); }

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = make_fields();
  return fields;
}

void set_field(ExperimentConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto& f : config_fields()) {
    if (f.key == key) {
      f.set(c, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown config key '{}'", key));
}

void apply_override(ExperimentConfig& c, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError(fmt::format("override '{}' is not KEY=VALUE", assignment));
  set_field(c, assignment.substr(0, eq), assignment.substr(eq + 1));
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected 'key = value'", line_no));
    try {
      set_field(base, s.substr(0, eq), s.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, std::string_view what) {
    if (!ok) throw ConfigError(std::string(what));
  };
  require(c.T >= 1, "T must be >= 1");
  require(c.n_trials >= 1, "n_trials must be >= 1");
  require(c.n_boot >= 1, "n_boot must be >= 1");
  require(c.steps > 0 || c.epochs > 0, "epochs or steps must be positive");
  for (const Range* r : {&c.ranges.log10_lr, &c.ranges.log10_wd, &c.ranges.momentum, &c.ranges.lr_multiplier})
    require(r->min < r->max, "initialisation ranges need min < max");
  require(c.ranges.momentum.min >= 0.0 && c.ranges.momentum.max <= 1.0, "momentum_range must lie in [0, 1]");
  require(c.ranges.lr_multiplier.min > 0.0, "lr_multiplier_range must be positive");
  require(c.meta.kappa > 0 && c.meta.beta1 >= 0 && c.meta.beta1 < 1 && c.meta.beta2 >= 0 && c.meta.beta2 < 1 &&
              c.meta.eps > 0,
          "meta-optimiser constants out of range");
  if (c.split.size() == 3) {
    require(c.split[0] > 0 && c.split[1] > 0 && c.split[2] > 0, "split fractions must be positive");
    require(std::abs(c.split[0] + c.split[1] + c.split[2] - 1.0) <= 1e-9, "split fractions must sum to 1");
  }
  for (std::size_t h : c.hidden) require(h >= 1, "hidden widths must be >= 1");
  require(!c.grid_T.empty() && !c.grid_i.empty(), "grid_T and grid_i must be non-empty");
  for (std::size_t t : c.grid_T) require(t >= 1, "grid_T entries must be >= 1");
  require(c.hyper_updates >= 1, "hyper_updates must be >= 1");
  if (c.dataset == "idx") require(!c.images.empty() && !c.labels.empty(), "dataset = idx needs images and labels");
}

std::string to_text(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : config_fields()) out += fmt::format("{} = {}\n", f.key, f.get(c));
  return out;
}

}  // namespace onepass::harness
