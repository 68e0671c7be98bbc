// Copyright 2026 The CRAFT Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "craft/config.h"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <yaml-cpp/yaml.h>

#include "craft/errors.h"

namespace craft {
namespace {

std::string LineOf(const YAML::Node& node) {
  return "line " + std::to_string(node.Mark().line + 1);
}

// Reads scalars out of one YAML mapping and rejects keys nobody asked for.
class Section {
 public:
  Section(const YAML::Node& node, std::string prefix)
      : node_(node), prefix_(std::move(prefix)) {
    if (node_ && !node_.IsMap()) {
      throw ConfigError(Key("") + " must be a mapping (" + LineOf(node_) + ")");
    }
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    known_.insert(key);
    if (!node_) return;
    const YAML::Node v = std::as_const(node_)[key];
    if (!v) return;
    if (!v.IsScalar()) {
      throw ConfigError(Key(key) + " must be a scalar (" + LineOf(v) + ")");
    }
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(Key(key) + ": cannot read '" + v.Scalar() + "' as " +
                        TypeName<T>() + " (" + LineOf(v) + ")");
    }
  }

  void GetIntList(const std::string& key, std::vector<int>& out) {
    known_.insert(key);
    if (!node_) return;
    const YAML::Node v = std::as_const(node_)[key];
    if (!v) return;
    if (!v.IsSequence()) {
      throw ConfigError(Key(key) + " must be a list (" + LineOf(v) + ")");
    }
    out.clear();
    for (const YAML::Node& item : v) {
      try {
        out.push_back(item.as<int>());
      } catch (const YAML::Exception&) {
        throw ConfigError(Key(key) + ": list entries must be integers (" +
                          LineOf(item) + ")");
      }
    }
  }

  bool Has(const std::string& key) const { return node_ && node_[key]; }

  // Marks a key as handled elsewhere (nested sections).
  void Known(const std::string& key) { known_.insert(key); }

  void RejectUnknown() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!known_.count(k)) {
        throw ConfigError("unknown key '" + Key(k) + "' (" + LineOf(kv.first) + ")");
      }
    }
  }

  std::string Key(const std::string& key) const {
    if (prefix_.empty()) return key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

 private:
  template <typename T>
  static const char* TypeName() {
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else return "an integer";
  }

  YAML::Node node_;
  std::string prefix_;
  std::set<std::string> known_;
};

std::string ResolvePath(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal().string();
}

}  // namespace

ExperimentConfig ParseConfigText(std::string_view text,
                                 const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError("syntax error at line " + std::to_string(e.mark.line + 1) + ": " +
                      e.msg);
  }
  if (!root.IsMap()) throw ConfigError("configuration must be a YAML mapping");

  ExperimentConfig cfg;
  Section top(root, "");
  top.Get("name", cfg.name);
  if (!top.Has("dataset")) throw ConfigError("missing required section 'dataset'");
  if (!top.Has("aggregator")) throw ConfigError("missing required section 'aggregator'");

  Section ds(root["dataset"], "dataset");
  std::string kind = "synthetic";
  if (!ds.Has("kind")) throw ConfigError("missing required key 'dataset.kind'");
  ds.Get("kind", kind);
  if (kind == "synthetic") {
    cfg.dataset.kind = DatasetSpec::Kind::kSynthetic;
  } else if (kind == "idx") {
    cfg.dataset.kind = DatasetSpec::Kind::kIdx;
  } else {
    throw ConfigError("dataset.kind must be 'synthetic' or 'idx', got '" + kind + "'");
  }
  ds.Get("classes", cfg.dataset.classes);
  ds.Get("features", cfg.dataset.features);
  ds.Get("samples", cfg.dataset.samples);
  ds.Get("class_sep", cfg.dataset.class_sep);
  ds.Get("images", cfg.dataset.images);
  ds.Get("labels", cfg.dataset.labels);
  ds.Get("limit", cfg.dataset.limit);
  ds.RejectUnknown();
  cfg.dataset.images = ResolvePath(cfg.dataset.images, base_dir);
  cfg.dataset.labels = ResolvePath(cfg.dataset.labels, base_dir);

  Section model(root["model"], "model");
  model.GetIntList("hidden", cfg.hidden_dims);
  std::string activation(ActivationName(cfg.activation));
  model.Get("activation", activation);
  try {
    cfg.activation = ParseActivation(activation);
  } catch (const InvalidInputError& e) {
    throw ConfigError(std::string("model.activation: ") + e.what());
  }
  model.RejectUnknown();

  Section fed(root["federation"], "federation");
  FederationSpec& f = cfg.federation;
  fed.Get("clients", f.num_clients);
  fed.Get("clients_per_round", f.clients_per_round);
  fed.Get("rounds", f.rounds);
  fed.Get("server_lr", f.server_lr);
  fed.Get("client_lr", f.client_lr);
  fed.Get("lr_decay", f.lr_decay);
  fed.Get("batch_size", f.batch_size);
  fed.Get("local_steps", f.local_steps);
  fed.Get("dirichlet_alpha", f.dirichlet_alpha);
  fed.Get("min_per_client", f.min_per_client);
  fed.Get("train_fraction", f.train_fraction);
  fed.Get("prox_mu", f.prox_mu);
  fed.Get("eval_every", f.eval_every);
  fed.Get("threads", f.threads);
  fed.RejectUnknown();

  Section agg(root["aggregator"], "aggregator");
  AggregatorSpec& a = cfg.aggregator;
  if (!agg.Has("kind")) throw ConfigError("missing required key 'aggregator.kind'");
  std::string agg_kind;
  agg.Get("kind", agg_kind);
  try {
    a.kind = ParseAggregatorKind(agg_kind);
  } catch (const InvalidInputError& e) {
    throw ConfigError(std::string("aggregator.kind: ") + e.what());
  }
  agg.Get("epsilon", a.epsilon);
  agg.Get("tau", a.tau);
  agg.Get("rank_tol", a.rank_tol);
  agg.Get("momentum", a.momentum);
  agg.Get("beta1", a.beta1);
  agg.Get("beta2", a.beta2);
  agg.Get("adapt_tau", a.adapt_tau);
  agg.RejectUnknown();

  Section seeds(root["seeds"], "seeds");
  seeds.Get("data", cfg.seeds.data);
  seeds.Get("partition", cfg.seeds.partition);
  seeds.Get("init", cfg.seeds.init);
  seeds.Get("sampling", cfg.seeds.sampling);
  seeds.Get("training", cfg.seeds.training);
  seeds.RejectUnknown();

  for (const char* key : {"dataset", "model", "federation", "aggregator", "seeds"}) {
    top.Known(key);
  }
  top.RejectUnknown();

  cfg.Validate();
  return cfg;
}

ExperimentConfig ParseConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseConfigText(text.str(), path.parent_path());
}

std::string SerializeConfig(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << cfg.name;

  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  if (cfg.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    out << YAML::Key << "kind" << YAML::Value << "synthetic";
  } else {
    out << YAML::Key << "kind" << YAML::Value << "idx";
  }
  out << YAML::Key << "classes" << YAML::Value << cfg.dataset.classes;
  out << YAML::Key << "features" << YAML::Value << cfg.dataset.features;
  out << YAML::Key << "samples" << YAML::Value << cfg.dataset.samples;
  out << YAML::Key << "class_sep" << YAML::Value << cfg.dataset.class_sep;
  out << YAML::Key << "images" << YAML::Value << cfg.dataset.images;
  out << YAML::Key << "labels" << YAML::Value << cfg.dataset.labels;
  out << YAML::Key << "limit" << YAML::Value << cfg.dataset.limit;
  out << YAML::EndMap;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "hidden" << YAML::Value << YAML::Flow << cfg.hidden_dims;
  out << YAML::Key << "activation" << YAML::Value
      << std::string(ActivationName(cfg.activation));
  out << YAML::EndMap;

  const FederationSpec& f = cfg.federation;
  out << YAML::Key << "federation" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "clients" << YAML::Value << f.num_clients;
  out << YAML::Key << "clients_per_round" << YAML::Value << f.clients_per_round;
  out << YAML::Key << "rounds" << YAML::Value << f.rounds;
  out << YAML::Key << "server_lr" << YAML::Value << f.server_lr;
  out << YAML::Key << "client_lr" << YAML::Value << f.client_lr;
  out << YAML::Key << "lr_decay" << YAML::Value << f.lr_decay;
  out << YAML::Key << "batch_size" << YAML::Value << f.batch_size;
  out << YAML::Key << "local_steps" << YAML::Value << f.local_steps;
  out << YAML::Key << "dirichlet_alpha" << YAML::Value << f.dirichlet_alpha;
  out << YAML::Key << "min_per_client" << YAML::Value << f.min_per_client;
  out << YAML::Key << "train_fraction" << YAML::Value << f.train_fraction;
  out << YAML::Key << "prox_mu" << YAML::Value << f.prox_mu;
  out << YAML::Key << "eval_every" << YAML::Value << f.eval_every;
  out << YAML::Key << "threads" << YAML::Value << f.threads;
  out << YAML::EndMap;

  const AggregatorSpec& a = cfg.aggregator;
  out << YAML::Key << "aggregator" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << std::string(AggregatorName(a.kind));
  out << YAML::Key << "epsilon" << YAML::Value << a.epsilon;
  out << YAML::Key << "tau" << YAML::Value << a.tau;
  out << YAML::Key << "rank_tol" << YAML::Value << a.rank_tol;
  out << YAML::Key << "momentum" << YAML::Value << a.momentum;
  out << YAML::Key << "beta1" << YAML::Value << a.beta1;
  out << YAML::Key << "beta2" << YAML::Value << a.beta2;
  out << YAML::Key << "adapt_tau" << YAML::Value << a.adapt_tau;
  out << YAML::EndMap;

  out << YAML::Key << "seeds" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "data" << YAML::Value << cfg.seeds.data;
  out << YAML::Key << "partition" << YAML::Value << cfg.seeds.partition;
  out << YAML::Key << "init" << YAML::Value << cfg.seeds.init;
  out << YAML::Key << "sampling" << YAML::Value << cfg.seeds.sampling;
  out << YAML::Key << "training" << YAML::Value << cfg.seeds.training;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void ApplySeedOverride(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("seed override '" + std::string(assignment) +
                      "' must look like name=value");
  }
  const std::string name(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  std::uint64_t parsed = 0;
  try {
    std::size_t used = 0;
    parsed = std::stoull(value, &used);
    if (used != value.size() || value.front() == '-') throw std::invalid_argument(value);
  } catch (const std::exception&) {
    throw ConfigError("seed override for '" + name + "': '" + value +
                      "' is not a non-negative integer");
  }
  std::uint64_t* slot = nullptr;
  if (name == "data") slot = &cfg.seeds.data;
  else if (name == "partition") slot = &cfg.seeds.partition;
  else if (name == "init") slot = &cfg.seeds.init;
  else if (name == "sampling") slot = &cfg.seeds.sampling;
  else if (name == "training") slot = &cfg.seeds.training;
  if (slot == nullptr) throw ConfigError("unknown seed '" + name + "' in override");
  *slot = parsed;
}

}  // namespace craft
