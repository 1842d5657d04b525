#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "biasprobe/corpus.hpp"
#include "biasprobe/error.hpp"
#include "biasprobe/hash.hpp"
#include "biasprobe/records.hpp"
#include "biasprobe/stats.hpp"

namespace biasprobe {

// Token -> dense vector, all of one dimension.
template <typename Scalar = double>
class EmbeddingTable {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit EmbeddingTable(Eigen::Index dimension = 0) : dimension_(dimension) {}

  Eigen::Index dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool empty() const noexcept { return vectors_.empty(); }

  template <typename Derived>
  void insert(std::string token, const Eigen::MatrixBase<Derived>& v) {
    if (dimension_ == 0) dimension_ = v.size();
    if (v.size() != dimension_)
      throw DomainError("embedding for '" + token + "' has dimension " + std::to_string(v.size()) +
                        ", table has " + std::to_string(dimension_));
    if (!v.allFinite()) throw DomainError("embedding for '" + token + "' is not finite");
    vectors_.insert_or_assign(std::move(token), Vector(v.template cast<Scalar>()));
  }

  const Vector* find(std::string_view token) const {
    auto it = vectors_.find(std::string(token));
    return it == vectors_.end() ? nullptr : &it->second;
  }

  std::string source_hash;

 private:
  Eigen::Index dimension_;
  std::unordered_map<std::string, Vector> vectors_;
};

// Whitespace-separated GloVe text format: token followed by d reals per line.
template <typename Scalar = double>
EmbeddingTable<Scalar> load_embeddings(const std::filesystem::path& path,
                                       const std::optional<std::set<std::string>>& vocabulary = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open embedding file: " + path.string());

  EmbeddingTable<Scalar> table;
  Eigen::Index dimension = 0;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  Sha256 hasher;
  while (std::getline(in, line)) {
    ++line_no;
    hasher.update(line);
    hasher.update("\n");
    fields.clear();
    std::string_view rest(line);
    while (!rest.empty()) {
      auto start = rest.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) break;
      rest.remove_prefix(start);
      auto end = rest.find_first_of(" \t\r");
      fields.push_back(rest.substr(0, end));
      rest.remove_prefix(end == std::string_view::npos ? rest.size() : end);
    }
    if (fields.empty()) continue;
    const Eigen::Index values = static_cast<Eigen::Index>(fields.size()) - 1;
    if (dimension == 0) {
      if (values == 0) throw ParseError("first line has no vector components", line_no);
      dimension = values;
    } else if (values != dimension) {
      throw ParseError("expected " + std::to_string(dimension) + " components, found " +
                           std::to_string(values),
                       line_no);
    }
    std::string token;
    for (char c : fields[0]) token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (vocabulary && !vocabulary->count(token)) continue;

    typename EmbeddingTable<Scalar>::Vector v(dimension);
    for (Eigen::Index i = 0; i < dimension; ++i) {
      const auto f = fields[static_cast<std::size_t>(i) + 1];
      double x = 0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(x))
        throw ParseError("bad vector component '" + std::string(f) + "'", line_no);
      v(i) = static_cast<Scalar>(x);
    }
    table.insert(std::move(token), v);
  }
  if (table.empty()) throw ParseError("no embeddings loaded from " + path.string());
  table.source_hash = hasher.hex_digest();
  return table;
}

// Stop tokens count toward a phrase's token total but never toward its vector.
inline constexpr std::array<std::string_view, 4> kStopTokens = {"and", "of", "the", "in"};

// Lowercased tokens split on non-alphanumeric ASCII (non-ASCII bytes kept).
std::vector<std::string> phrase_tokens(std::string_view text);

template <typename Scalar>
struct PhraseVector {
  std::optional<typename EmbeddingTable<Scalar>::Vector> vector;  // absent when nothing was found
  double coverage = 0;
  int found = 0;
  int total = 0;
};

template <typename Scalar>
PhraseVector<Scalar> phrase_vector(std::string_view text, const EmbeddingTable<Scalar>& table) {
  PhraseVector<Scalar> out;
  typename EmbeddingTable<Scalar>::Vector sum =
      EmbeddingTable<Scalar>::Vector::Zero(table.dimension());
  for (const auto& tok : phrase_tokens(text)) {
    ++out.total;
    if (std::find(kStopTokens.begin(), kStopTokens.end(), tok) != kStopTokens.end()) continue;
    if (const auto* v = table.find(tok)) {
      sum += *v;
      ++out.found;
    }
  }
  if (out.total > 0) out.coverage = static_cast<double>(out.found) / out.total;
  if (out.found > 0) out.vector = sum / static_cast<Scalar>(out.found);
  return out;
}

// u.v / (|u| |v|), clamped to [-1, 1].
template <typename DerivedU, typename DerivedV>
double cosine(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v) {
  if (u.size() != v.size()) throw DomainError("cosine: dimension mismatch");
  const double nu = u.template cast<double>().norm();
  const double nv = v.template cast<double>().norm();
  if (nu == 0.0 || nv == 0.0) throw DomainError("cosine: undefined for a zero vector");
  const double c = u.template cast<double>().dot(v.template cast<double>()) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

inline constexpr std::array<std::string_view, 5> kFemaleWords = {"she", "her", "hers", "woman",
                                                                 "female"};
inline constexpr std::array<std::string_view, 5> kMaleWords = {"he", "him", "his", "man", "male"};

template <typename Scalar>
struct GenderVectors {
  typename EmbeddingTable<Scalar>::Vector female;
  typename EmbeddingTable<Scalar>::Vector male;
  int female_tokens = 0;
  int male_tokens = 0;
};

// Unweighted mean of the listed words that the table contains.
template <typename Scalar>
GenderVectors<Scalar> gender_vectors(const EmbeddingTable<Scalar>& table) {
  auto mean_of = [&](auto words, int& found) {
    typename EmbeddingTable<Scalar>::Vector sum =
        EmbeddingTable<Scalar>::Vector::Zero(table.dimension());
    for (auto w : words) {
      if (const auto* v = table.find(w)) {
        sum += *v;
        ++found;
      }
    }
    if (found == 0) throw DomainError("embedding table contains none of the gender words");
    sum /= static_cast<Scalar>(found);
    if (sum.isZero(0)) throw DomainError("gender vector is zero");
    return sum;
  };
  GenderVectors<Scalar> gv;
  gv.female = mean_of(kFemaleWords, gv.female_tokens);
  gv.male = mean_of(kMaleWords, gv.male_tokens);
  return gv;
}

struct AssociationScore {
  std::string context_key;
  std::optional<double> female_sim;
  std::optional<double> male_sim;
  std::optional<double> net_female;  // female_sim - male_sim
  double coverage = 0;
};

template <typename Scalar>
AssociationScore gender_association(std::string_view context, const EmbeddingTable<Scalar>& table,
                                    const GenderVectors<Scalar>& gv) {
  AssociationScore s;
  s.context_key = std::string(context);
  const auto pv = phrase_vector(context, table);
  s.coverage = pv.coverage;
  if (!pv.vector || pv.vector->isZero(0)) return s;
  s.female_sim = cosine(*pv.vector, gv.female);
  s.male_sim = cosine(*pv.vector, gv.male);
  s.net_female = *s.female_sim - *s.male_sim;
  return s;
}

// ---------------------------------------------------------------------------
// Association report: hallucinated-name gender shares per prompt context,
// joined with the context's embedding association.

enum class ContextKind { Industry, CompanyIndustry, Subject };
std::string_view to_string(ContextKind kind);

struct ContextCounts {
  std::string engine;
  std::optional<double> temperature;  // absent: pooled over temperatures
  ContextKind kind = ContextKind::Industry;
  std::string context_key;
  int female = 0;
  int male = 0;
  int unknown = 0;
  int persons = 0;              // corpus rows with this context
  int female_persons = 0;
  int male_persons = 0;

  int hallucinated() const noexcept { return female + male + unknown; }
  std::optional<double> female_hallucination_share() const {
    if (female + male == 0) return std::nullopt;
    return static_cast<double>(female) / (female + male);
  }
  std::optional<double> actual_female_share() const {
    if (female_persons + male_persons == 0) return std::nullopt;
    return static_cast<double>(female_persons) / (female_persons + male_persons);
  }
};

// Hallucinated names (names matching no truth member) of distinct responses,
// counted per (engine, temperature | pooled, context kind, context key).
// Output ordered by engine, temperature (pooled last), kind, key.
std::vector<ContextCounts> count_contexts(std::span<const RunRecord> records,
                                          std::span<const NotablePerson> corpus);

struct AssociationRow {
  ContextCounts counts;
  AssociationScore score;
};

struct CorrelationSummary {
  std::string engine;
  std::optional<double> temperature;
  ContextKind kind = ContextKind::Industry;
  int contexts = 0;  // eligible contexts used
  std::optional<double> r_female_sim;
  std::optional<double> r_net_female;
  std::string note;
};

struct AssociationOptions {
  int min_names = 5;  // contexts with fewer hallucinated names are excluded from r
};

struct AssociationReport {
  std::vector<AssociationRow> rows;
  std::vector<CorrelationSummary> correlations;
};

// Pearson r of association (x) against female hallucination share (y) over the
// eligible contexts of one (engine, temperature, kind) group.
CorrelationSummary correlate(std::span<const AssociationRow> group, const AssociationOptions& options);

template <typename Scalar>
AssociationReport association_report(std::span<const RunRecord> records,
                                     std::span<const NotablePerson> corpus,
                                     const EmbeddingTable<Scalar>& table,
                                     const GenderVectors<Scalar>& gv,
                                     const AssociationOptions& options = {}) {
  AssociationReport report;
  std::unordered_map<std::string, AssociationScore> cache;
  for (auto& counts : count_contexts(records, corpus)) {
    auto it = cache.find(counts.context_key);
    if (it == cache.end())
      it = cache.emplace(counts.context_key, gender_association(counts.context_key, table, gv)).first;
    report.rows.push_back(AssociationRow{std::move(counts), it->second});
  }
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= report.rows.size(); ++i) {
    const bool boundary =
        i == report.rows.size() || report.rows[i].counts.engine != report.rows[begin].counts.engine ||
        report.rows[i].counts.temperature != report.rows[begin].counts.temperature ||
        report.rows[i].counts.kind != report.rows[begin].counts.kind;
    if (!boundary) continue;
    report.correlations.push_back(
        correlate(std::span<const AssociationRow>(report.rows).subspan(begin, i - begin), options));
    begin = i;
  }
  return report;
}

}  // namespace biasprobe
