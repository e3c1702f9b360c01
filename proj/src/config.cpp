#include "gwe/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <type_traits>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace gwe::pipeline {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string kind_list(const std::vector<learn::Kind>& kinds) {
  std::vector<std::string> names;
  for (auto k : kinds) names.push_back(learn::to_string(k));
  return join(names);
}

std::vector<learn::Kind> parse_kind_list(const std::string& v) {
  std::vector<learn::Kind> out;
  for (const auto& name : split_list(v)) {
    const auto kind = learn::parse_kind(name);
    require(std::find(out.begin(), out.end(), kind) == out.end(), "config: model '" + name + "' listed twice");
    out.push_back(kind);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size(), "config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  require(ec == std::errc() && p == v.data() + v.size(), "config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: '" + key + "' expects true or false, got '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <class Member>
Field number(std::string section, std::string key, Member member) {
  return {section, key,
          [member](const PipelineConfig& c) { return data::format_double(static_cast<double>(member(const_cast<PipelineConfig&>(c)))); },
          [member, key](PipelineConfig& c, const std::string& v) {
            auto& ref = member(c);
            using T = std::remove_reference_t<decltype(ref)>;
            if constexpr (std::is_floating_point_v<T>) {
              ref = to_double(key, v);
            } else {
              const auto x = to_int(key, v);
              if constexpr (std::is_unsigned_v<T>) require(x >= 0, "config: '" + key + "' must be nonnegative");
              ref = static_cast<T>(x);
            }
          }};
}

template <class Member>
Field flag(std::string section, std::string key, Member member) {
  return {section, key, [member](const PipelineConfig& c) { return bool_text(member(const_cast<PipelineConfig&>(c))); },
          [member, key](PipelineConfig& c, const std::string& v) { member(c) = to_bool(key, v); }};
}

template <class Member>
Field text(std::string section, std::string key, Member member) {
  return {section, key, [member](const PipelineConfig& c) { return member(const_cast<PipelineConfig&>(c)); },
          [member](PipelineConfig& c, const std::string& v) { member(c) = v; }};
}

std::string policy_text(outlier::FlagPolicy p) { return p == outlier::FlagPolicy::union_of ? "union" : "intersection"; }

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  static const std::vector<Field> f = {
      number("run", "seed", [](C& c) -> auto& { return c.seed; }),
      text("run", "out_dir", [](C& c) -> auto& { return c.out_dir; }),

      text("data", "path", [](C& c) -> auto& { return c.data.path; }),
      text("data", "schema", [](C& c) -> auto& { return c.data.schema; }),
      text("data", "label_negative", [](C& c) -> auto& { return c.data.labels.negative; }),
      text("data", "label_positive", [](C& c) -> auto& { return c.data.labels.positive; }),
      number("data", "test_fraction", [](C& c) -> auto& { return c.data.test_fraction; }),

      flag("outliers", "enabled", [](C& c) -> auto& { return c.outliers.enabled; }),
      {"outliers", "columns", [](const C& c) { return join(c.outliers.columns); },
       [](C& c, const std::string& v) { c.outliers.columns = split_list(v); }},
      number("outliers", "max_points", [](C& c) -> auto& { return c.outliers.bcp.changepoints.max_points; }),
      {"outliers", "penalty",
       [](const C& c) {
         const double p = c.outliers.bcp.changepoints.prior_penalty;
         return std::isnan(p) ? std::string("auto") : data::format_double(p);
       },
       [](C& c, const std::string& v) {
         c.outliers.bcp.changepoints.prior_penalty =
             v == "auto" ? std::numeric_limits<double>::quiet_NaN() : to_double("penalty", v);
       }},
      number("outliers", "min_segment", [](C& c) -> auto& { return c.outliers.bcp.changepoints.min_segment; }),
      number("outliers", "iqr_k", [](C& c) -> auto& { return c.outliers.bcp.iqr_k; }),
      number("outliers", "hampel_k", [](C& c) -> auto& { return c.outliers.bcp.hampel_k; }),
      number("outliers", "window", [](C& c) -> auto& { return c.outliers.bcp.window; }),
      {"outliers", "policy", [](const C& c) { return policy_text(c.outliers.bcp.policy); },
       [](C& c, const std::string& v) {
         require(v == "union" || v == "intersection", "config: outliers.policy must be union or intersection");
         c.outliers.bcp.policy = v == "union" ? outlier::FlagPolicy::union_of : outlier::FlagPolicy::intersection;
       }},
      flag("outliers", "apply_to_test", [](C& c) -> auto& { return c.outliers.apply_to_test; }),

      flag("augment", "quantile", [](C& c) -> auto& { return c.augment.quantile; }),
      number("augment", "ratio", [](C& c) -> auto& { return c.augment.ratio; }),
      number("augment", "noise_scale", [](C& c) -> auto& { return c.augment.noise_scale; }),

      flag("features", "enabled", [](C& c) -> auto& { return c.features.enabled; }),
      number("features", "k", [](C& c) -> auto& { return c.features.k; }),
      {"features", "estimator", [](const C& c) { return learn::to_string(c.features.estimator.kind); },
       [](C& c, const std::string& v) {
         const auto kind = learn::parse_kind(v);
         require(kind == learn::Kind::gb || kind == learn::Kind::ert, "config: features.estimator must be gb or ert");
         if (kind != c.features.estimator.kind) c.features.estimator = learn::ClassifierSpec::defaults(kind);
       }},
      number("features", "cv_folds", [](C& c) -> auto& { return c.features.cv_folds; }),
      number("features", "k_min", [](C& c) -> auto& { return c.features.k_min; }),
      number("features", "k_max", [](C& c) -> auto& { return c.features.k_max; }),

      flag("pso", "enabled", [](C& c) -> auto& { return c.tune.enabled; }),
      number("pso", "particles", [](C& c) -> auto& { return c.tune.swarm.particles; }),
      number("pso", "iterations", [](C& c) -> auto& { return c.tune.swarm.iterations; }),
      number("pso", "c1", [](C& c) -> auto& { return c.tune.swarm.c1; }),
      number("pso", "c2", [](C& c) -> auto& { return c.tune.swarm.c2; }),
      number("pso", "w", [](C& c) -> auto& { return c.tune.swarm.w; }),
      number("pso", "folds", [](C& c) -> auto& { return c.tune.folds; }),
      number("pso", "max_rows", [](C& c) -> auto& { return c.tune.max_rows; }),
      {"pso", "models", [](const C& c) { return kind_list(c.tune.models); },
       [](C& c, const std::string& v) { c.tune.models = parse_kind_list(v); }},

      number("learners", "lr_max_iter", [](C& c) -> auto& { return c.learners.lr_max_iter; }),
      number("learners", "svm_max_iter", [](C& c) -> auto& { return c.learners.svm_max_iter; }),
      number("learners", "svm_calibration_fraction", [](C& c) -> auto& { return c.learners.svm_calibration_fraction; }),
      number("learners", "gb_bins", [](C& c) -> auto& { return c.learners.gb_bins; }),
      number("learners", "gb_lambda", [](C& c) -> auto& { return c.learners.gb_lambda; }),
      number("learners", "gb_min_child_weight", [](C& c) -> auto& { return c.learners.gb_min_child_weight; }),
      number("learners", "gb_min_samples_leaf", [](C& c) -> auto& { return c.learners.gb_min_samples_leaf; }),
      number("learners", "ert_max_features", [](C& c) -> auto& { return c.learners.ert_max_features; }),
      number("learners", "mlp_epochs", [](C& c) -> auto& { return c.learners.mlp_epochs; }),
      number("learners", "mlp_batch_size", [](C& c) -> auto& { return c.learners.mlp_batch_size; }),
      number("learners", "mlp_learning_rate", [](C& c) -> auto& { return c.learners.mlp_learning_rate; }),

      {"train", "models", [](const C& c) { return kind_list(c.train.models); },
       [](C& c, const std::string& v) { c.train.models = parse_kind_list(v); }},
      {"train", "ensembles", [](const C& c) { return join(c.train.ensembles); },
       [](C& c, const std::string& v) { c.train.ensembles = split_list(v); }},
      number("train", "validation_fraction", [](C& c) -> auto& { return c.train.validation_fraction; }),
      number("train", "stack_folds", [](C& c) -> auto& { return c.train.stack_folds; }),

      number("greedy", "lambda", [](C& c) -> auto& { return c.train.greedy.lambda; }),
      number("greedy", "delta", [](C& c) -> auto& { return c.train.greedy.delta; }),
      number("greedy", "min_delta", [](C& c) -> auto& { return c.train.greedy.min_delta; }),
      number("greedy", "max_passes", [](C& c) -> auto& { return c.train.greedy.max_passes; }),
      number("greedy", "tolerance", [](C& c) -> auto& { return c.train.greedy.tolerance; }),

      {"blendnet", "layer_widths",
       [](const C& c) {
         std::vector<std::string> w;
         for (int x : c.blendnet.layer_widths) w.push_back(std::to_string(x));
         return join(w);
       },
       [](C& c, const std::string& v) {
         c.blendnet.layer_widths.clear();
         for (const auto& x : split_list(v)) c.blendnet.layer_widths.push_back(static_cast<int>(to_int("layer_widths", x)));
       }},
      number("blendnet", "dropout_rate", [](C& c) -> auto& { return c.blendnet.dropout_rate; }),
      number("blendnet", "epochs", [](C& c) -> auto& { return c.blendnet.epochs; }),
      number("blendnet", "batch_size", [](C& c) -> auto& { return c.blendnet.batch_size; }),
      number("blendnet", "learning_rate", [](C& c) -> auto& { return c.blendnet.learning_rate; }),
      number("blendnet", "bn_momentum", [](C& c) -> auto& { return c.blendnet.bn_momentum; }),

      number("evaluate", "threshold", [](C& c) -> auto& { return c.evaluate.threshold; }),
      number("evaluate", "n_boot", [](C& c) -> auto& { return c.evaluate.n_boot; }),
      number("evaluate", "calibration_bins", [](C& c) -> auto& { return c.evaluate.calibration_bins; }),
  };
  return f;
}

constexpr std::string_view kEstimatorPrefix = "estimator.";

}  // namespace

const std::vector<std::string>& ensemble_names() {
  static const std::vector<std::string> names = {"greedy", "vote", "average", "stack"};
  return names;
}

void PipelineConfig::validate() const {
  require(data.test_fraction > 0.0 && data.test_fraction < 1.0, "config: data.test_fraction must be in (0, 1)");
  require(outliers.bcp.window >= 1, "config: outliers.window must be >= 1");
  require(outliers.bcp.changepoints.max_points >= 0, "config: outliers.max_points must be >= 0");
  require(augment.ratio >= 1.0, "config: augment.ratio must be >= 1");
  require(augment.noise_scale >= 0.0, "config: augment.noise_scale must be >= 0");
  require(features.k >= 1, "config: features.k must be >= 1");
  require(features.cv_folds >= 2, "config: features.cv_folds must be >= 2");
  require(features.k_min >= 1, "config: features.k_min must be >= 1");
  require(features.k_max == 0 || features.k_max >= features.k_min, "config: features.k_max must be 0 or >= k_min");
  features.estimator.validate();
  require(tune.folds >= 2, "config: pso.folds must be >= 2");
  require(tune.swarm.particles >= 1 && tune.swarm.iterations >= 0, "config: pso.particles >= 1 and pso.iterations >= 0");
  learn::ClassifierSpec probe;
  probe.options = learners;
  probe.validate();
  for (const auto& e : train.ensembles)
    require(std::find(ensemble_names().begin(), ensemble_names().end(), e) != ensemble_names().end(),
            "config: unknown ensemble '" + e + "' (expected greedy, vote, average or stack)");
  require(!train.models.empty(), "config: train.models must name at least one model");
  require(train.validation_fraction > 0.0 && train.validation_fraction < 1.0,
          "config: train.validation_fraction must be in (0, 1)");
  require(train.stack_folds >= 2, "config: train.stack_folds must be >= 2");
  train.greedy.validate();
  blendnet.validate();
  require(evaluate.n_boot >= 2, "config: evaluate.n_boot must be >= 2");
  require(evaluate.calibration_bins >= 2, "config: evaluate.calibration_bins must be >= 2");
}

PipelineConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  PipelineConfig c;
  std::map<std::string, std::string> estimator_params;
  for (const auto& [section, body] : tree) {
    require(!body.empty() || body.data().empty(), "config: top-level key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string value = trim(node.get_value<std::string>());
      if (section == "features" && key.rfind(kEstimatorPrefix, 0) == 0) {
        estimator_params[key.substr(kEstimatorPrefix.size())] = value;
        continue;
      }
      const auto& all = fields();
      auto it = std::find_if(all.begin(), all.end(), [&](const Field& f) { return f.section == section && f.key == key; });
      require(it != all.end(), "config: unknown key '" + key + "' in section [" + section + "]");
      it->set(c, value);
    }
  }
  for (const auto& [name, value] : estimator_params)
    c.features.estimator.hyperparameters[name] = to_double("features.estimator." + name, value);
  auto resolve = [&](std::string& p) {
    if (!p.empty() && !base_dir.empty() && std::filesystem::path(p).is_relative()) p = (base_dir / p).lexically_normal().string();
  };
  resolve(c.data.path);
  resolve(c.data.schema);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "config: cannot open " + path.string());
  return parse_config(in, path.parent_path());
}

std::string dump_config(const PipelineConfig& config, const std::string& section) {
  std::ostringstream out;
  std::string current;
  for (const auto& f : fields()) {
    if (!section.empty() && f.section != section) continue;
    if (f.section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << f.section << "]\n";
      current = f.section;
    }
    out << f.key << " = " << f.get(config) << '\n';
    if (f.section == "features" && f.key == "estimator")
      for (const auto& [name, value] : config.features.estimator.hyperparameters)
        out << kEstimatorPrefix << name << " = " << data::format_double(value) << '\n';
  }
  return out.str();
}

}  // namespace gwe::pipeline
