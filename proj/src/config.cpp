#include "biasprobe/config.hpp"

#include <cmath>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include "toml.hpp"

#include "biasprobe/backend.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/hash.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe {

using nlohmann::json;

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Sim: return "sim";
    case BackendKind::Http: return "http";
    case BackendKind::Replay: return "replay";
  }
  return "sim";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  const auto key = text::to_lower_ascii(text::trim(s));
  if (key == "sim" || key == "simulator") return BackendKind::Sim;
  if (key == "http") return BackendKind::Http;
  if (key == "replay") return BackendKind::Replay;
  return std::nullopt;
}

std::string BackendConfig::effective_engine() const {
  if (!engine.empty()) return engine;
  if (kind == BackendKind::Http && !model.empty()) return model;
  return "sim";
}

bool ExperimentConfig::relaxed() const {
  for (double t : temperatures)
    if (!is_protocol_temperature(t)) return true;
  return runs > kMaxRunIndex;
}

namespace {

json toml_to_json(const toml::node& node) {
  if (auto* t = node.as_table()) {
    json out = json::object();
    for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v);
    return out;
  }
  if (auto* a = node.as_array()) {
    json out = json::array();
    for (const auto& v : *a) out.push_back(toml_to_json(v));
    return out;
  }
  if (auto v = node.value_exact<std::int64_t>()) return *v;
  if (auto v = node.value_exact<double>()) return *v;
  if (auto v = node.value_exact<bool>()) return *v;
  if (auto v = node.value_exact<std::string>()) return *v;
  if (auto v = node.value_exact<toml::date>()) {
    std::ostringstream s;
    s << *v;
    return s.str();
  }
  if (auto v = node.value_exact<toml::date_time>()) {
    std::ostringstream s;
    s << *v;
    return s.str();
  }
  throw ValidationError("config: unsupported TOML value");
}

class Section {
 public:
  Section(const json& j, std::string name, std::vector<std::string>& warnings)
      : j_(j), name_(std::move(name)), warnings_(warnings) {
    if (!j_.is_null() && !j_.is_object()) throw ValidationError("config: [" + name_ + "] must be a table");
  }
  ~Section() {
    if (!j_.is_object()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) warnings_.push_back("config: unknown key " + name_ + "." + k + " ignored");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key) || j_[key].is_null()) return nullptr;
    return &j_[key];
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ValidationError("config: " + name_ + "." + key + " has the wrong type");
      }
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::vector<std::string>& warnings_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

Gender gender_field(const json& v, const std::string& key) {
  const auto g = v.is_string() ? parse_gender(v.get<std::string>()) : std::nullopt;
  if (!g || *g == Gender::Unknown) throw ValidationError("config: " + key + " must be female or male");
  return *g;
}

}  // namespace

Config config_from_json(const json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw ValidationError("config: top level must be a table");
  Config c;
  auto& w = c.warnings;
  for (const auto& [k, v] : j.items())
    if (k != "backend" && k != "experiment" && k != "simulator" && k != "paths" && k != "runtime")
      w.push_back("config: unknown section [" + k + "] ignored");

  static const json kNull;
  auto sub = [&](const char* name) -> const json& { return j.contains(name) ? j[name] : kNull; };

  {
    Section s(sub("backend"), "backend", w);
    std::string kind;
    s.read("kind", kind);
    if (!kind.empty()) {
      auto k = parse_backend_kind(kind);
      if (!k) throw UsageError("config: backend.kind must be sim, http or replay");
      c.backend.kind = *k;
    }
    s.read("engine", c.backend.engine);
    s.read("url", c.backend.url);
    s.read("model", c.backend.model);
    s.read("max_in_flight", c.backend.max_in_flight);
    s.read("requests_per_minute", c.backend.requests_per_minute);
    s.read("timeout_seconds", c.backend.timeout_seconds);
    if (const json* r = s.get("retry")) {
      Section rs(*r, "backend.retry", w);
      long long initial = c.backend.retry.initial_backoff.count();
      long long max = c.backend.retry.max_backoff.count();
      rs.read("max_attempts", c.backend.retry.max_attempts);
      rs.read("initial_backoff_ms", initial);
      rs.read("multiplier", c.backend.retry.multiplier);
      rs.read("max_backoff_ms", max);
      c.backend.retry.initial_backoff = std::chrono::milliseconds{initial};
      c.backend.retry.max_backoff = std::chrono::milliseconds{max};
    }
  }
  {
    Section s(sub("experiment"), "experiment", w);
    s.read("temperatures", c.experiment.temperatures);
    s.read("runs", c.experiment.runs);
    s.read("strict", c.experiment.strict);
    s.read("declination_patterns", c.experiment.declination_patterns);
    s.read("min_context_names", c.experiment.min_context_names);
    if (const json* band = s.get("ambiguity_band")) {
      if (!band->is_array() || band->size() != 2 || !(*band)[0].is_number() || !(*band)[1].is_number())
        throw ValidationError("config: experiment.ambiguity_band must be [low, high]");
      c.experiment.ambiguity_band = std::pair{(*band)[0].get<double>(), (*band)[1].get<double>()};
    }
  }
  {
    Section s(sub("simulator"), "simulator", w);
    auto& p = c.simulator;
    std::string process;
    s.read("process", process);
    if (!process.empty()) {
      auto parsed = parse_process(process);
      if (!parsed)
        throw SimulatorConfigError(
            "config: simulator.process must be true_representation, association_based or prejudice");
      p.process = *parsed;
    }
    s.read("actual_female_share", p.actual_female_share);
    s.read("association_skew", p.association_skew);
    if (const json* g = s.get("rejected_gender")) p.rejected_gender = gender_field(*g, "simulator.rejected_gender");
    s.read("correct_prob", p.correct_prob);
    s.read("decline_prob", p.decline_prob);
    s.read("seed", p.seed);
    s.read("context_female_share", p.context_female_share);
    if (const json* pool = s.get("name_pool")) {
      if (!pool->is_object()) throw ValidationError("config: simulator.name_pool must map gender to names");
      for (const auto& [k, v] : pool->items()) {
        const Gender g = gender_field(json(k), "simulator.name_pool key");
        try {
          p.name_pool[g] = v.get<std::vector<std::string>>();
        } catch (const json::exception&) {
          throw ValidationError("config: simulator.name_pool." + k + " must be a list of names");
        }
      }
    }
  }
  {
    Section s(sub("paths"), "paths", w);
    if (const json* corpus = s.get("corpus")) {
      if (!corpus->is_object())
        throw ValidationError("config: paths.corpus must map task to a CSV path");
      for (const auto& [k, v] : corpus->items()) {
        auto task = parse_task(k);
        if (!task) throw ValidationError("config: unknown task '" + k + "' in paths.corpus");
        if (!v.is_string()) throw ValidationError("config: paths.corpus." + k + " must be a path");
        c.paths.corpora.push_back({*task, resolve(base, v.get<std::string>())});
      }
    }
    auto opt_path = [&](const char* key, std::optional<std::filesystem::path>& out) {
      std::string p;
      s.read(key, p);
      if (!p.empty()) out = resolve(base, p);
    };
    opt_path("ssa", c.paths.ssa);
    opt_path("embeddings", c.paths.embeddings);
    opt_path("name_pool", c.paths.name_pool);
    opt_path("replay_cache", c.paths.replay_cache);
    std::string out;
    s.read("out", out);
    if (!out.empty()) c.paths.out = resolve(base, out);
  }
  {
    Section s(sub("runtime"), "runtime", w);
    s.read("workers", c.runtime.workers);
    long max_requests = -1;
    s.read("max_requests", max_requests);
    if (max_requests >= 0) c.runtime.max_requests = max_requests;
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  const std::string content = text::read_file(path);
  const auto base = path.parent_path();
  auto from_toml = [&] {
    try {
      return config_from_json(toml_to_json(toml::parse(content, path.string())), base);
    } catch (const toml::parse_error& e) {
      std::ostringstream msg;
      msg << "config: " << e.description() << " at line " << e.source().begin.line;
      throw ValidationError(msg.str());
    }
  };
  if (path.extension() == ".toml") return from_toml();
  json j = json::parse(content, nullptr, false);
  if (j.is_discarded()) {
    if (path.extension() == ".json") throw ValidationError("config: " + path.string() + " is not valid JSON");
    return from_toml();
  }
  return config_from_json(j, base);
}

void finalize(Config& c, bool check_backend) {
  auto& e = c.experiment;
  if (e.runs < 1) throw ValidationError("config: experiment.runs must be at least 1");
  if (e.temperatures.empty()) throw ValidationError("config: experiment.temperatures is empty");
  std::set<double> seen;
  for (double t : e.temperatures) {
    if (!std::isfinite(t) || t < 0.0 || t > 2.0)
      throw ValidationError("config: temperature " + text::fixed(t, 2) + " outside [0, 2]");
    if (!seen.insert(t).second) throw ValidationError("config: duplicate temperature " + text::fixed(t, 2));
    if (!is_protocol_temperature(t))
      c.warnings.push_back("temperature " + text::fixed(t, 2) +
                           " is outside the protocol set {0, 0.5, 1}; results are not comparable");
  }
  if (e.runs > kMaxRunIndex)
    c.warnings.push_back("runs = " + std::to_string(e.runs) + " exceeds the protocol's five runs");
  if (e.ambiguity_band && !(e.ambiguity_band->first <= e.ambiguity_band->second))
    throw ValidationError("config: ambiguity_band low must not exceed high");
  if (e.min_context_names < 1) throw ValidationError("config: experiment.min_context_names must be >= 1");
  if (c.runtime.workers < 1) throw ValidationError("config: runtime.workers must be >= 1");

  if (!check_backend) return;
  auto& b = c.backend;
  if (b.max_in_flight < 1) throw ValidationError("config: backend.max_in_flight must be >= 1");
  if (b.retry.max_attempts < 1) throw ValidationError("config: backend.retry.max_attempts must be >= 1");
  if (b.kind == BackendKind::Http && (b.url.empty() || b.model.empty()))
    throw UsageError("config: the http backend needs backend.url and backend.model");

  if (b.kind == BackendKind::Sim) {
    if (c.simulator.name_pool.empty() && c.paths.name_pool) c.simulator.name_pool = load_name_pool(*c.paths.name_pool);
    validate(c.simulator);
  }
}

json to_json(const Config& c) {
  json pool = json::object();
  for (const auto& [g, names] : c.simulator.name_pool) pool[std::string(to_string(g))] = names;
  json corpora = json::array();
  for (const auto& spec : c.paths.corpora)
    corpora.push_back({{"task", to_string(spec.task)}, {"file", spec.path.filename().string()}});
  json band = nullptr;
  if (c.experiment.ambiguity_band) band = {c.experiment.ambiguity_band->first, c.experiment.ambiguity_band->second};

  json j = {
      {"backend",
       {{"kind", to_string(c.backend.kind)},
        {"engine", c.backend.effective_engine()},
        {"url", c.backend.url},
        {"model", c.backend.model}}},
      {"experiment",
       {{"temperatures", c.experiment.temperatures},
        {"runs", c.experiment.runs},
        {"declination_patterns", c.experiment.declination_patterns},
        {"ambiguity_band", band},
        {"min_context_names", c.experiment.min_context_names}}},
      {"paths", {{"corpora", corpora}}},
  };
  if (c.backend.kind == BackendKind::Sim) {
    j["simulator"] = {{"process", to_string(c.simulator.process)},
                      {"actual_female_share", c.simulator.actual_female_share},
                      {"association_skew", c.simulator.association_skew},
                      {"rejected_gender", to_string(c.simulator.rejected_gender)},
                      {"correct_prob", c.simulator.correct_prob},
                      {"decline_prob", c.simulator.decline_prob},
                      {"seed", c.simulator.seed},
                      {"context_female_share", c.simulator.context_female_share},
                      {"name_pool", pool}};
  }
  return j;
}

std::string config_hash(const Config& config) { return sha256_hex(to_json(config).dump()); }

std::vector<double> parse_temperature_list(std::string_view csv) {
  std::vector<double> out;
  std::string item;
  std::istringstream in{std::string(csv)};
  while (std::getline(in, item, ',')) {
    const auto t = text::trim(item);
    if (t.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(std::string(t), &used);
      if (used != t.size()) throw std::invalid_argument("trailing");
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad temperature '" + std::string(t) + "'");
    }
  }
  if (out.empty()) throw UsageError("empty temperature list");
  return out;
}

}  // namespace biasprobe
