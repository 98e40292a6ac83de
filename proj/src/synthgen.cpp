#include "loscope/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "loscope/csv.hpp"
#include "loscope/error.hpp"
#include "loscope/event_pipeline.hpp"
#include "loscope/io.hpp"
#include "loscope/parallel.hpp"
#include "loscope/taxonomy.hpp"
#include "loscope/text.hpp"

namespace loscope::synth {

namespace {

constexpr const char* kCourseKey = "xPRO+AMx+2024_T1";
constexpr const char* kLmsBase = "https://lms.example.org/courses/course-v1:xPRO+AMx+2024_T1";
constexpr const char* kCourseStart = "2024-01-08T00:00:00Z";
constexpr double kMedianDwellS = 4 * 3600.0;
constexpr double kDwellSigma = 0.55;
constexpr double kGradeMean = 0.65;
constexpr double kGradeSpread = 0.15;
constexpr double kPassGrade = 0.60;
constexpr double kPointsPerProblem = 10.0;
constexpr std::size_t kLearnersPerFile = 250;
constexpr std::size_t kEventsPerSession = 25;

constexpr std::uint64_t kCourseStream = 1;
constexpr std::uint64_t kDefectStream = 2;
constexpr std::uint64_t kLearnerStream = 1'000;
constexpr std::uint64_t kGradeStream = 2'000'000'000;
constexpr std::uint64_t kStaffStream = 3'000'000'000;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent substream per (seed, stream id). Distributions are written out
// here because the standard ones are not specified bit-for-bit.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (stream * 0xD1B54A32D192ED03ULL);
    engine_.seed(splitmix64(state));
  }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  double exponential() { return -std::log(1.0 - uniform()); }
  std::uint64_t bits() { return engine_(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

// Split `total` into `parts` near-equal counts, larger ones first.
std::vector<std::size_t> split_even(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

// Largest-remainder apportionment of `total` by weights; ties go to the lower index.
std::vector<std::size_t> apportion(const LevelWeights& weights, std::size_t total) {
  std::vector<std::size_t> out(weights.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t given = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const double exact = weights[l] * static_cast<double>(total);
    out[l] = static_cast<std::size_t>(std::floor(exact));
    given += out[l];
    rema.emplace_back(exact - std::floor(exact), l);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; given < total; ++k, ++given) ++out[rema[k % rema.size()].second];
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out.push_back(sep);
    out += p;
  }
  return out;
}

std::string hex_tail(std::string_view id) { return std::string(id.substr(id.rfind('@') + 1)); }

double textbook_r(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  const double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return den > 0 ? (n * sxy - sx * sy) / den : 0.0;
}

void check_weights(const LevelWeights& w, const std::string& what) {
  double sum = 0;
  for (double x : w) {
    if (!(x >= 0) || !std::isfinite(x)) throw SpecError(what + ": weights must be non-negative");
    sum += x;
  }
  if (std::fabs(sum - 1.0) > 1e-9) throw SpecError(what + ": weights must sum to 1");
}

}  // namespace

void CohortSpec::validate() const {
  if (n_learners < 1) throw SpecError("n_learners must be >= 1");
  if (weeks < 1) throw SpecError("weeks must be >= 1");
  if (activities_total < 1) throw SpecError("activities_total must be >= 1");
  if (lo_count < 1) throw SpecError("lo_count must be >= 1");
  if (!(planted_rho >= -1.0 && planted_rho <= 1.0)) throw SpecError("planted_rho must be in [-1, 1]");
  if (!(break_s >= 0.002) || !std::isfinite(break_s)) throw SpecError("break_s must be positive");
  if (events_per_learner < 2) throw SpecError("events_per_learner must be >= 2");
  if (!(supplemental_fraction >= 0.0 && supplemental_fraction < 1.0)) {
    throw SpecError("supplemental_fraction must be in [0, 1)");
  }
  if (bloom_profile.size() != 1 && bloom_profile.size() != weeks) {
    throw SpecError("bloom_profile needs 1 row or one row per week");
  }
  for (std::size_t w = 0; w < bloom_profile.size(); ++w) {
    check_weights(bloom_profile[w], "bloom_profile row " + std::to_string(w + 1));
  }
  check_weights(supplemental_bloom, "supplemental_bloom");
  const auto supplemental = static_cast<std::size_t>(std::floor(static_cast<double>(activities_total) * supplemental_fraction));
  if (activities_total - supplemental < weeks) throw SpecError("fewer weekly activities than weeks");
}

const LevelWeights& CohortSpec::week_profile(std::size_t week) const {
  return bloom_profile.size() == 1 ? bloom_profile[0] : bloom_profile.at(week - 1);
}

CohortSpec parse_cohort_spec(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SpecError("spec must be a JSON object");
  CohortSpec s;
  auto weights = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 6) throw SpecError(key + ": expected 6 weights");
    LevelWeights w{};
    for (std::size_t l = 0; l < 6; ++l) w[l] = v[l].get<double>();
    return w;
  };
  try {
    for (const auto& [key, v] : j.items()) {
      auto count = [&] {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw SpecError(key + ": expected a non-negative integer");
        return v.get<std::size_t>();
      };
      if (key == "n_learners") s.n_learners = count();
      else if (key == "weeks") s.weeks = count();
      else if (key == "activities_total") s.activities_total = count();
      else if (key == "lo_count") s.lo_count = count();
      else if (key == "planted_rho") s.planted_rho = v.get<double>();
      else if (key == "break_s") s.break_s = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "events_per_learner") s.events_per_learner = count();
      else if (key == "supplemental_fraction") s.supplemental_fraction = v.get<double>();
      else if (key == "staff_learners") s.staff_learners = count();
      else if (key == "supplemental_bloom") s.supplemental_bloom = weights(v, key);
      else if (key == "bloom_profile") {
        s.bloom_profile.clear();
        if (v.is_array() && !v.empty() && v[0].is_number()) {
          s.bloom_profile.push_back(weights(v, key));
        } else if (v.is_array()) {
          for (const auto& row : v) s.bloom_profile.push_back(weights(row, key));
        } else {
          throw SpecError("bloom_profile must be an array");
        }
      } else if (key == "defects") {
        if (!v.is_object()) throw SpecError("defects must be an object");
        for (const auto& [dk, dv] : v.items()) {
          auto dcount = [&] {
            if (!dv.is_number_integer() || dv.get<std::int64_t>() < 0) throw SpecError(dk + ": expected a non-negative integer");
            return dv.get<std::size_t>();
          };
          if (dk == "untagged_leaves") s.defects.untagged_leaves = dcount();
          else if (dk == "assessment_free_lo") s.defects.assessment_free_lo = dv.get<bool>();
          else if (dk == "duplicate_lines") s.defects.duplicate_lines = dcount();
          else if (dk == "out_of_order") s.defects.out_of_order = dcount();
          else if (dk == "zero_possible_per_learner") s.defects.zero_possible_per_learner = dcount();
          else throw SpecError("unknown defect key: " + dk);
        }
      } else {
        throw SpecError("unknown spec key: " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("spec has a value of the wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const CohortSpec& s) {
  nlohmann::json profile = nlohmann::json::array();
  for (const auto& row : s.bloom_profile) profile.push_back(row);
  return {{"n_learners", s.n_learners},
          {"weeks", s.weeks},
          {"activities_total", s.activities_total},
          {"lo_count", s.lo_count},
          {"planted_rho", s.planted_rho},
          {"bloom_profile", profile},
          {"supplemental_bloom", s.supplemental_bloom},
          {"break_s", s.break_s},
          {"seed", s.seed},
          {"events_per_learner", s.events_per_learner},
          {"supplemental_fraction", s.supplemental_fraction},
          {"staff_learners", s.staff_learners},
          {"defects",
           {{"untagged_leaves", s.defects.untagged_leaves},
            {"assessment_free_lo", s.defects.assessment_free_lo},
            {"duplicate_lines", s.defects.duplicate_lines},
            {"out_of_order", s.defects.out_of_order},
            {"zero_possible_per_learner", s.defects.zero_possible_per_learner}}}};
}

SynthCourse gen_course(const CohortSpec& spec) {
  spec.validate();
  Stream rng(spec.seed, kCourseStream);
  SynthCourse c;

  std::set<std::string> used_hex;
  auto new_id = [&](const std::string& type) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    do {
      const auto bits = rng.bits();
      hex.clear();
      for (int k = 0; k < 12; ++k) hex.push_back(kHex[(bits >> (4 * k)) & 0xF]);
    } while (!used_hex.insert(hex).second);
    return std::string("block-v1:") + kCourseKey + "+type@" + type + "+block@" + hex;
  };

  // Registry: one group per week (fewer when objectives run short).
  const std::size_t n_groups = std::min(spec.weeks, spec.lo_count);
  std::vector<std::vector<std::string>> group_los(n_groups);
  csv::Writer registry({"code", "group", "description", "week"});
  const auto group_sizes = split_even(spec.lo_count, n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::string group = "LO" + std::to_string(g + 1);
    for (std::size_t k = 1; k <= group_sizes[g]; ++k) {
      const std::string code = group + "." + std::to_string(k);
      group_los[g].push_back(code);
      c.lo_codes.push_back(code);
      registry.row({code, group, "Objective " + code, std::to_string(g + 1)});
    }
  }
  c.registry_csv = registry.str();

  nlohmann::json modules = nlohmann::json::array();
  auto add_module = [&](const std::string& id, const char* kind, const std::string& block_type,
                        const std::string& name, const std::optional<std::string>& parent, std::size_t ordinal) {
    nlohmann::json m = {{"id", id}, {"kind", kind}, {"display_name", name}, {"ordinal", ordinal}};
    m["parent_id"] = parent ? nlohmann::json(*parent) : nlohmann::json(nullptr);
    if (!block_type.empty()) m["block_type"] = block_type;
    modules.push_back(std::move(m));
    ++c.module_count;
  };
  const std::string root_id = std::string("block-v1:") + kCourseKey + "+type@course+block@course";
  add_module(root_id, "course_root", "", "Additive Manufacturing", std::nullopt, 0);

  const auto supplemental =
      static_cast<std::size_t>(std::floor(static_cast<double>(spec.activities_total) * spec.supplemental_fraction));
  auto week_counts = split_even(spec.activities_total - supplemental, spec.weeks);

  auto build_chapter = [&](int week, std::size_t n_leaves) {
    const bool graded = week > 0;
    const std::size_t ch_index = c.chapters.size();
    const std::string ch_id = new_id("chapter");
    c.chapters.push_back({ch_id, week});
    const std::string ch_name = graded ? "Week " + std::to_string(week) : "Supplemental Knowledge Base";
    add_module(ch_id, "chapter", "", ch_name, root_id, ch_index);
    const auto seq_sizes = split_even(n_leaves, std::min<std::size_t>(3, n_leaves));
    for (std::size_t s = 0; s < seq_sizes.size(); ++s) {
      const std::string seq_id = new_id("sequential");
      const std::size_t seq_index = c.sequentials.size();
      c.sequentials.push_back({seq_id, ch_index, 0});
      const std::string seq_label = ch_name + " / Lesson " + std::to_string(s + 1);
      add_module(seq_id, "sequential", "", seq_label, ch_id, s);
      const auto vert_sizes = split_even(seq_sizes[s], std::min<std::size_t>(2, seq_sizes[s]));
      for (std::size_t v = 0; v < vert_sizes.size(); ++v) {
        const std::string vert_id = new_id("vertical");
        add_module(vert_id, "vertical", "", seq_label + " / Unit " + std::to_string(v + 1), seq_id, v);
        for (std::size_t b = 0; b < vert_sizes[v]; ++b) {
          const std::string type = graded && b + 1 == vert_sizes[v] ? "problem" : (b % 2 ? "html" : "video");
          const std::string id = new_id(type);
          add_module(id, "block", type, type + " " + hex_tail(id).substr(0, 6), vert_id, b);
          if (type == "problem") ++c.sequentials[seq_index].problems;
          c.leaves.push_back({id, type, ch_index, seq_index, week, {}, 0});
        }
      }
    }
  };
  for (std::size_t w = 0; w < spec.weeks; ++w) build_chapter(static_cast<int>(w + 1), week_counts[w]);
  if (supplemental > 0) build_chapter(0, supplemental);

  c.course_json = nlohmann::json{{"course_id", std::string("course-v1:") + kCourseKey},
                                 {"title", "Additive Manufacturing for Innovative Design and Production"},
                                 {"modules", modules}}
                      .dump(1);

  // LO tags. Each week's problems jointly carry every objective of the week's group.
  auto draw_k = [&] {
    const double u = rng.uniform();
    return std::min<std::size_t>(u < 0.5 ? 1 : u < 0.8 ? 2 : 3, spec.lo_count);
  };
  auto add_code = [](std::vector<std::string>& codes, const std::string& code) {
    if (std::find(codes.begin(), codes.end(), code) == codes.end()) codes.push_back(code);
  };
  for (std::size_t ch = 0; ch < c.chapters.size(); ++ch) {
    const int week = c.chapters[ch].week;
    std::vector<std::size_t> members, problems;
    for (std::size_t i = 0; i < c.leaves.size(); ++i) {
      if (c.leaves[i].chapter != ch) continue;
      members.push_back(i);
      if (c.leaves[i].type == "problem") problems.push_back(i);
    }
    if (week > 0) {
      const auto& los = group_los[static_cast<std::size_t>(week - 1) % n_groups];
      for (std::size_t k = 0; k < los.size(); ++k) {
        auto& codes = c.leaves[problems[k % problems.size()]].los;
        add_code(codes, los[k]);
        if (codes.size() > kMaxLosPerActivity) {
          throw SpecError("week " + std::to_string(week) + " has too few problems for its objectives");
        }
      }
    }
    for (std::size_t i : members) {
      auto& leaf = c.leaves[i];
      const auto& home = week > 0 ? group_los[static_cast<std::size_t>(week - 1) % n_groups]
                                  : group_los[rng.below(n_groups)];
      const std::size_t k = std::max(draw_k(), leaf.los.size());
      if (leaf.los.empty()) add_code(leaf.los, home[rng.below(home.size())]);
      for (int attempt = 0; leaf.los.size() < k && attempt < 64; ++attempt) {
        add_code(leaf.los, rng.uniform() < 0.8 ? home[rng.below(home.size())] : c.lo_codes[rng.below(c.lo_codes.size())]);
      }
    }
    // Bloom levels: exact per-week counts, shuffled across the week's activities.
    const auto counts = apportion(week > 0 ? spec.week_profile(static_cast<std::size_t>(week)) : spec.supplemental_bloom,
                                  members.size());
    std::vector<int> levels;
    for (std::size_t l = 0; l < counts.size(); ++l) levels.insert(levels.end(), counts[l], static_cast<int>(l + 1));
    rng.shuffle(levels);
    for (std::size_t k = 0; k < members.size(); ++k) c.leaves[members[k]].bloom = levels[k];
  }

  // Planted: one objective never carried by a problem, still taught elsewhere.
  std::optional<std::size_t> holder;
  if (spec.defects.assessment_free_lo) {
    if (spec.lo_count < 2) throw SpecError("assessment_free_lo needs at least 2 objectives");
    const auto& group = group_los[(spec.weeks - 1) % n_groups];
    const std::string target = group.back();
    for (auto& leaf : c.leaves) {
      if (leaf.type != "problem") continue;
      std::erase(leaf.los, target);
      if (leaf.los.empty()) leaf.los.push_back(group.size() > 1 ? group.front() : c.lo_codes.front());
    }
    for (std::size_t i = 0; i < c.leaves.size() && !holder; ++i) {
      auto& leaf = c.leaves[i];
      if (leaf.type == "problem" || leaf.week != static_cast<int>(spec.weeks)) continue;
      if (std::find(leaf.los.begin(), leaf.los.end(), target) == leaf.los.end()) {
        if (leaf.los.size() < kMaxLosPerActivity) leaf.los.push_back(target);
        else leaf.los.back() = target;
      }
      holder = i;
    }
    if (!holder) throw SpecError("assessment_free_lo needs a non-problem activity in the last week");
    c.assessment_free_lo = target;
  }

  if (spec.defects.untagged_leaves > 0) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < c.leaves.size(); ++i) {
      if (c.leaves[i].type != "problem" && c.leaves[i].week > 0 && i != holder) candidates.push_back(i);
    }
    if (candidates.size() < spec.defects.untagged_leaves) throw SpecError("not enough activities to leave untagged");
    rng.shuffle(candidates);
    candidates.resize(spec.defects.untagged_leaves);
    std::sort(candidates.begin(), candidates.end());
    for (std::size_t i : candidates) {
      c.leaves[i].los.clear();
      c.leaves[i].bloom = 0;
      c.untagged_leaves.push_back(c.leaves[i].id);
    }
  }

  csv::Writer tags({"module_id", "lo_codes", "bloom_level"});
  for (const auto& leaf : c.leaves) {
    if (!leaf.los.empty()) tags.row({leaf.id, join(leaf.los, ';'), std::to_string(leaf.bloom)});
  }
  c.tags_csv = tags.str();

  csv::Writer overrides({"chapter_id", "week"});
  for (const auto& ch : c.chapters) {
    if (ch.week == 0) overrides.row({ch.id, "0"});
  }
  c.week_overrides_csv = overrides.str();
  return c;
}

namespace {

struct LearnerDraw {
  std::string id;
  std::vector<std::string> lines;  // chronological
  std::int64_t dwell_ms = 0;
  std::int64_t unmapped_ms = 0;
  std::vector<std::pair<std::size_t, std::int64_t>> leaf_dwell;  // (leaf index, ms)
  double latent_noise = 0;
};

std::string event_line(const std::string& learner, Millis ts, const SynthLeaf* leaf, Stream& rng) {
  nlohmann::json j = {{"username", learner}, {"time", format_timestamp(ts)}};
  if (leaf == nullptr) {
    j["event_type"] = "page_view";
    j["event_source"] = "browser";
    j["page"] = "https://lms.example.org/dashboard";
  } else if (leaf->type == "video") {
    j["event_type"] = rng.uniform() < 0.7 ? "play_video" : "pause_video";
    j["event_source"] = rng.uniform() < 0.1 ? "mobile" : "browser";
    j["page"] = std::string(kLmsBase) + "/courseware/";
    j["event"] = nlohmann::json{{"id", leaf->id}, {"currentTime", static_cast<int>(rng.below(900))}}.dump();
  } else if (leaf->type == "problem") {
    j["event_type"] = "problem_check";
    j["event_source"] = "server";
    j["event"] = {{"id", leaf->id}, {"attempts", 1 + static_cast<int>(rng.below(3))}};
  } else {
    j["event_type"] = "page_view";
    j["event_source"] = "browser";
    j["page"] = std::string(kLmsBase) + "/jump_to_id/" + hex_tail(leaf->id);
  }
  return j.dump();
}

LearnerDraw draw_learner(const CohortSpec& spec, const SynthCourse& course, std::size_t i,
                         const std::string& id, Millis course_start) {
  Stream rng(spec.seed, kLearnerStream + i);
  LearnerDraw out;
  out.id = id;
  const double ability = rng.normal();
  out.latent_noise = rng.normal();

  const auto break_ms = static_cast<Millis>(std::llround(spec.break_s * 1000.0));
  const Millis cap = break_ms - 1;
  const Millis total = std::max<Millis>(
      60'000, std::llround(1000.0 * std::exp(std::log(kMedianDwellS) + kDwellSigma * ability)));

  auto events = static_cast<std::size_t>(
      std::llround(static_cast<double>(spec.events_per_learner) * (0.75 + 0.5 * rng.uniform())));
  events = std::max<std::size_t>(events, 2);
  const std::size_t sessions = std::max<std::size_t>(1, (events + kEventsPerSession / 2) / kEventsPerSession);
  const auto min_gaps = static_cast<std::size_t>(std::ceil(static_cast<double>(total) / (0.8 * static_cast<double>(cap))));
  events = std::max(events, min_gaps + sessions);
  const std::size_t gaps = events - sessions;

  // Integer gaps in [1, cap] summing exactly to `total`.
  std::vector<double> weight(gaps);
  double weight_sum = 0;
  for (auto& w : weight) weight_sum += (w = rng.exponential() + 0.05);
  std::vector<Millis> gap(gaps);
  Millis assigned = 0;
  for (std::size_t g = 0; g < gaps; ++g) {
    gap[g] = std::clamp<Millis>(static_cast<Millis>(std::floor(static_cast<double>(total) * weight[g] / weight_sum)), 1, cap);
    assigned += gap[g];
  }
  for (Millis rest = total - assigned; rest != 0;) {
    for (std::size_t g = 0; g < gaps && rest != 0; ++g) {
      const Millis step = rest > 0 ? std::min(cap - gap[g], rest) : -std::min(gap[g] - 1, -rest);
      gap[g] += step;
      rest -= step;
    }
  }

  std::vector<std::size_t> session_size(sessions, 1);
  for (std::size_t e = sessions; e < events; ++e) ++session_size[rng.below(sessions)];

  Millis t = course_start + static_cast<Millis>(rng.below(3 * 86'400'000ULL));
  std::size_t pos = 0, next_gap = 0;
  std::map<std::size_t, Millis> per_leaf;
  const std::size_t n_leaves = course.leaves.size();
  for (std::size_t s = 0; s < sessions; ++s) {
    for (std::size_t k = 0; k < session_size[s]; ++k) {
      const bool unmapped = rng.uniform() < 0.03;
      const SynthLeaf* leaf = unmapped ? nullptr : &course.leaves[pos];
      out.lines.push_back(event_line(id, t, leaf, rng));
      const Millis dwell = k + 1 < session_size[s] ? gap[next_gap++] : 0;
      out.dwell_ms += dwell;
      if (unmapped) out.unmapped_ms += dwell;
      else per_leaf[pos] += dwell;
      if (k + 1 < session_size[s]) t += dwell;
      if (!unmapped) {
        const double u = rng.uniform();
        if (u < 0.55) pos = (pos + 1) % n_leaves;
        else if (u < 0.6) pos = rng.below(n_leaves);
      }
    }
    t += break_ms + 1 + static_cast<Millis>(rng.below(36 * 3'600'000ULL));
  }
  out.leaf_dwell.assign(per_leaf.begin(), per_leaf.end());
  return out;
}

}  // namespace

SynthCohort gen_cohort(const CohortSpec& spec, const SynthCourse& course, unsigned threads) {
  spec.validate();
  const Millis course_start = *parse_timestamp(kCourseStart);
  const std::size_t n = spec.n_learners;
  const std::size_t width = std::to_string(n).size();
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string num = std::to_string(i + 1);
    ids[i] = "learner_" + std::string(std::max<std::size_t>(width, 4) - num.size(), '0') + num;
  }

  std::vector<LearnerDraw> draws(n);
  parallel_for(n, threads, [&](std::size_t i) { draws[i] = draw_learner(spec, course, i, ids[i], course_start); });

  SynthCohort out;
  GroundTruth& truth = out.truth;
  truth.n = n;

  // Final grade = affine map of rho*z(dwell) + sqrt(1-rho^2)*noise, with the
  // noise orthogonalized in-sample so the planted correlation is exact before
  // the 6-decimal rounding.
  std::vector<double> dwell_s(n), z(n), noise(n);
  for (std::size_t i = 0; i < n; ++i) dwell_s[i] = static_cast<double>(draws[i].dwell_ms) / 1000.0;
  auto standardize = [n](std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0;
    for (auto& x : v) {
      x -= mean;
      ss += x * x;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    for (auto& x : v) x = sd > 0 ? x / sd : 0.0;
  };
  z = dwell_s;
  standardize(z);
  for (std::size_t i = 0; i < n; ++i) noise[i] = draws[i].latent_noise;
  standardize(noise);
  double dot = 0, zz = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dot += noise[i] * z[i];
    zz += z[i] * z[i];
  }
  if (zz > 0) {
    for (std::size_t i = 0; i < n; ++i) noise[i] -= dot / zz * z[i];
  }
  standardize(noise);
  const double rho = spec.planted_rho;
  std::vector<double> raw(n);
  double scale = kGradeSpread;
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = rho * z[i] + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * noise[i];
    if (raw[i] > 0) scale = std::min(scale, (1.0 - kGradeMean) / raw[i]);
    if (raw[i] < 0) scale = std::min(scale, kGradeMean / -raw[i]);
  }
  std::vector<double> grade(n);
  csv::Writer finals({"learner_id", "grade", "certificate"});
  for (std::size_t i = 0; i < n; ++i) {
    grade[i] = *parse_double(fixed6(kGradeMean + scale * raw[i]));
    auto& lt = truth.learners[ids[i]];
    lt.dwell_ms = draws[i].dwell_ms;
    lt.unmapped_ms = draws[i].unmapped_ms;
    lt.events = draws[i].lines.size();
    lt.grade = grade[i];
    lt.passed = grade[i] >= kPassGrade;
    finals.row({ids[i], fixed6(grade[i]), lt.passed ? "earned" : "notpassing"});
    for (const auto& [leaf, ms] : draws[i].leaf_dwell) truth.module_dwell_ms[course.leaves[leaf].id] += ms;
  }
  out.final_csv = finals.str();
  truth.realized_r = n >= 3 ? textbook_r(dwell_s, grade) : 0.0;

  // Subsection points: noisy per-sequential measurements around the final
  // grade, with week 2 harder than the rest.
  std::vector<std::vector<std::string>> seq_los(course.sequentials.size());
  for (std::size_t s = 0; s < course.sequentials.size(); ++s) {
    std::set<std::string> codes;
    for (const auto& leaf : course.leaves) {
      if (leaf.sequential == s && leaf.type == "problem") codes.insert(leaf.los.begin(), leaf.los.end());
    }
    seq_los[s].assign(codes.begin(), codes.end());
  }
  std::vector<std::size_t> zero_seqs;
  for (std::size_t s = 0; s < course.sequentials.size(); ++s) {
    if (course.sequentials[s].problems == 0 && zero_seqs.size() < spec.defects.zero_possible_per_learner) zero_seqs.push_back(s);
  }
  if (zero_seqs.size() < spec.defects.zero_possible_per_learner) {
    throw SpecError("zero_possible_per_learner exceeds the number of ungraded sequentials");
  }
  csv::Writer subsection({"learner_id", "sequential_id", "earned", "possible"});
  for (std::size_t i = 0; i < n; ++i) {
    Stream rng(spec.seed, kGradeStream + i);
    for (std::size_t s = 0; s < course.sequentials.size(); ++s) {
      const auto& seq = course.sequentials[s];
      if (seq.problems == 0) {
        if (std::find(zero_seqs.begin(), zero_seqs.end(), s) != zero_seqs.end()) {
          subsection.row({ids[i], seq.id, "0", "0"});
          ++truth.zero_possible_rows;
          ++truth.subsection_rows;
        }
        continue;
      }
      const int week = course.chapters[seq.chapter].week;
      const double difficulty = week == 1 ? 0.1 : week == 2 ? -0.2 : 0.0;
      const double possible = kPointsPerProblem * static_cast<double>(seq.problems);
      const double frac = std::clamp(grade[i] + difficulty + 0.08 * rng.normal(), 0.0, 1.0);
      const std::string earned_text = fixed(possible * frac, 2);
      const double earned = *parse_double(earned_text);
      subsection.row({ids[i], seq.id, earned_text, fixed(possible, 2)});
      ++truth.subsection_rows;
      for (const auto& code : seq_los[s]) {
        auto& [e, p] = truth.lo_grades[{ids[i], code}];
        e += earned;
        p += possible;
      }
    }
  }
  out.subsection_csv = subsection.str();

  // Course-side truth.
  for (const auto& ch : course.chapters) truth.bloom_counts[ch.week];
  for (const auto& leaf : course.leaves) {
    if (leaf.los.empty()) continue;
    ++truth.tagged_activities;
    ++truth.bloom_counts[leaf.week][static_cast<std::size_t>(leaf.bloom - 1)];
    for (const auto& code : leaf.los) ++truth.bipartite[{course.chapters[leaf.chapter].id, code}];
  }
  truth.untagged_leaves = course.untagged_leaves;
  truth.assessment_free_lo = course.assessment_free_lo;

  // Log-level defects: disjoint adjacent swaps and exact duplicate lines.
  Stream defects(spec.seed, kDefectStream);
  std::vector<std::vector<char>> touched(n);
  std::vector<std::vector<char>> doubled(n);
  for (std::size_t i = 0; i < n; ++i) {
    touched[i].assign(draws[i].lines.size(), 0);
    doubled[i].assign(draws[i].lines.size(), 0);
  }
  const std::size_t budget = 1000 + 100 * (spec.defects.out_of_order + spec.defects.duplicate_lines);
  std::size_t attempts = 0;
  while (truth.out_of_order < spec.defects.out_of_order) {
    if (++attempts > budget) throw SpecError("cannot place the requested out-of-order events");
    const std::size_t i = defects.below(n);
    const std::size_t m = draws[i].lines.size();
    const std::size_t j = defects.below(m - 1);
    if (touched[i][j] || touched[i][j + 1]) continue;
    touched[i][j] = touched[i][j + 1] = 1;
    std::swap(draws[i].lines[j], draws[i].lines[j + 1]);
    ++truth.out_of_order;
  }
  while (truth.duplicate_lines < spec.defects.duplicate_lines) {
    if (++attempts > budget) throw SpecError("cannot place the requested duplicate lines");
    const std::size_t i = defects.below(n);
    const std::size_t j = defects.below(draws[i].lines.size());
    if (touched[i][j]) continue;
    touched[i][j] = doubled[i][j] = 1;
    ++truth.duplicate_lines;
  }

  std::vector<std::string> staff_lines;
  for (std::size_t k = 0; k < spec.staff_learners; ++k) {
    Stream rng(spec.seed, kStaffStream + k);
    const std::string id = "staff_" + std::string(k + 1 < 10 ? "0" : "") + std::to_string(k + 1);
    truth.staff.push_back(id);
    out.exclusions += id + "\n";
    Millis t = course_start;
    for (int e = 0; e < 10; ++e, t += 60'000) {
      staff_lines.push_back(event_line(id, t, &course.leaves[rng.below(course.leaves.size())], rng));
    }
  }

  for (std::size_t begin = 0; begin < n; begin += kLearnersPerFile) {
    std::string file;
    for (std::size_t i = begin; i < std::min(n, begin + kLearnersPerFile); ++i) {
      for (std::size_t j = 0; j < draws[i].lines.size(); ++j) {
        file += draws[i].lines[j];
        file += '\n';
        if (doubled[i][j]) {
          file += draws[i].lines[j];
          file += '\n';
        }
        truth.event_lines += doubled[i][j] ? 2 : 1;
      }
    }
    out.event_files.push_back(std::move(file));
  }
  for (const auto& line : staff_lines) {
    out.event_files.back() += line + "\n";
    ++truth.event_lines;
  }
  return out;
}

nlohmann::json GroundTruth::to_json() const {
  nlohmann::json learners_json = nlohmann::json::object();
  for (const auto& [id, t] : learners) {
    learners_json[id] = {{"dwell_ms", t.dwell_ms}, {"unmapped_ms", t.unmapped_ms}, {"events", t.events},
                         {"grade", t.grade}, {"passed", t.passed}};
  }
  nlohmann::json lo = nlohmann::json::array();
  for (const auto& [key, pts] : lo_grades) lo.push_back({key.first, key.second, pts.first, pts.second});
  nlohmann::json bloom = nlohmann::json::object();
  for (const auto& [week, counts] : bloom_counts) bloom[std::to_string(week)] = counts;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [key, w] : bipartite) edges.push_back({key.first, key.second, w});
  return {{"n", n},
          {"realized_r", realized_r},
          {"learners", learners_json},
          {"module_dwell_ms", module_dwell_ms},
          {"lo_grades", lo},
          {"bloom_counts", bloom},
          {"bipartite", edges},
          {"event_lines", event_lines},
          {"tagged_activities", tagged_activities},
          {"subsection_rows", subsection_rows},
          {"staff", staff},
          {"defects",
           {{"untagged_leaves", untagged_leaves},
            {"assessment_free_lo", assessment_free_lo ? nlohmann::json(*assessment_free_lo) : nlohmann::json(nullptr)},
            {"duplicate_lines", duplicate_lines},
            {"out_of_order", out_of_order},
            {"zero_possible_rows", zero_possible_rows}}}};
}

std::vector<std::pair<std::string, CohortSpec>> plant_defects(const CohortSpec& base) {
  CohortSpec clean = base;
  clean.defects = {};
  std::vector<std::pair<std::string, CohortSpec>> out = {{"clean", clean}};
  auto variant = [&](const char* name, auto&& set) {
    CohortSpec s = clean;
    set(s.defects);
    out.emplace_back(name, s);
  };
  variant("untagged_leaves", [](DefectSpec& d) { d.untagged_leaves = 10; });
  variant("assessment_free_lo", [](DefectSpec& d) { d.assessment_free_lo = true; });
  variant("duplicate_lines", [](DefectSpec& d) { d.duplicate_lines = 25; });
  variant("out_of_order", [](DefectSpec& d) { d.out_of_order = 15; });
  variant("zero_possible", [](DefectSpec& d) { d.zero_possible_per_learner = 3; });
  return out;
}

WrittenFixture write_fixture(const CohortSpec& spec, const std::filesystem::path& out_dir, unsigned threads) {
  const auto course = gen_course(spec);
  auto cohort = gen_cohort(spec, course, threads);
  std::vector<std::pair<std::string, std::string>> files = {
      {FixtureLayout::kCourse, course.course_json},
      {FixtureLayout::kRegistry, course.registry_csv},
      {FixtureLayout::kTags, course.tags_csv},
      {FixtureLayout::kWeekOverrides, course.week_overrides_csv},
      {FixtureLayout::kSubsection, cohort.subsection_csv},
      {FixtureLayout::kFinal, cohort.final_csv},
      {FixtureLayout::kExclusions, cohort.exclusions},
      {FixtureLayout::kTruth, cohort.truth.to_json().dump(1) + "\n"},
      {FixtureLayout::kSpec, to_json(spec).dump(2) + "\n"},
  };
  for (std::size_t f = 0; f < cohort.event_files.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "part-%03zu.ndjson", f);
    files.emplace_back(std::string(FixtureLayout::kEventsDir) + "/" + name, std::move(cohort.event_files[f]));
  }
  std::sort(files.begin(), files.end());
  WrittenFixture out;
  for (const auto& [rel, contents] : files) {
    io::write_file(out_dir / rel, contents);
    out.manifest.emplace_back(rel, io::sha256_hex(contents));
  }
  out.truth = std::move(cohort.truth);
  return out;
}

}  // namespace loscope::synth
