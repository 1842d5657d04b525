#include "biasprobe/backend.hpp"

#include <cmath>

#include "json.hpp"

#include "biasprobe/cache.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/hash.hpp"

namespace biasprobe {

bool is_protocol_temperature(double t) { return t == 0.0 || t == 0.5 || t == 1.0; }

void validate(const CompletionRequest& r, bool relaxed) {
  if (r.prompt.empty()) throw ValidationError("completion request has an empty prompt");
  if (relaxed) {
    if (!(r.temperature >= 0.0 && r.temperature <= 2.0))
      throw ValidationError("temperature must lie in [0, 2]");
    if (r.run_index < 1) throw ValidationError("run_index must be >= 1");
  } else {
    if (!is_protocol_temperature(r.temperature))
      throw ValidationError("temperature must be one of 0, 0.5, 1");
    if (r.run_index < 1 || r.run_index > kMaxRunIndex)
      throw ValidationError("run_index must lie in [1, 5]");
  }
}

std::string fingerprint(const CompletionRequest& r) {
  const nlohmann::json canonical = {r.engine, r.prompt, r.temperature, r.run_index};
  return sha256_hex(canonical.dump());
}

CompletionResult CachedBackend::complete(const CompletionRequest& request, const NotablePerson& truth) {
  if (auto hit = cache_.lookup(fingerprint(request))) return *hit;
  ++forwarded_;
  CompletionResult result = inner_.complete(request, truth);
  cache_.record(request, result);
  return result;
}

std::string CachedBackend::descriptor() const { return inner_.descriptor(); }

CompletionResult ReplayBackend::complete(const CompletionRequest& request, const NotablePerson&) {
  const std::string fp = fingerprint(request);
  if (auto hit = cache_.lookup(fp)) return *hit;
  throw CacheMissError(fp);
}

}  // namespace biasprobe
