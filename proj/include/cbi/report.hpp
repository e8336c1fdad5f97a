#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbi/classify.hpp"
#include "cbi/cutout.hpp"
#include "cbi/verdict.hpp"

namespace cbi::report {

using json = nlohmann::ordered_json;

inline constexpr int kDigits = 12;

/// Decimal text with 12 significant digits; infinities as "inf"/"-inf".
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", kDigits, x);
  return buf;
}

/// JSON number rounded to 12 significant digits. Non-finite values become
/// strings since JSON has no literal for them.
inline json num(double x) {
  if (!std::isfinite(x)) return fmt(x);
  return std::strtod(fmt(x).c_str(), nullptr);
}

inline json num(const std::optional<double>& x) { return x ? num(*x) : json(nullptr); }

inline json to_json(const Evidence& e) {
  json cps = json::array();
  for (const auto& c : e.checkpoints) cps.push_back({{"label", c.label}, {"value", num(c.value)}});
  return {{"checkpoints", std::move(cps)}, {"notes", e.notes}};
}

/// Fixed key set: grey, conservative, zero_class, heavy, intervals,
/// stationary, dim_upper, dim_lower, method, evidence.
inline json to_json(const ZeroSetReport& r) {
  Evidence all = r.evidence;
  auto merge = [&all](const Evidence& e, const std::string& prefix) {
    auto tag = [&prefix](const std::string& s) { return s.rfind(prefix, 0) == 0 ? s : prefix + s; };
    for (const auto& c : e.checkpoints) all.add(tag(c.label), c.value);
    for (const auto& n : e.notes) all.note(tag(n));
  };
  merge(r.grey.evidence, "grey.");
  merge(r.conservative.evidence, "conservative.");
  merge(r.heavy.evidence, "heavy.");
  merge(r.intervals.evidence, "intervals.");
  merge(r.stationary.evidence, "stationary.");
  json j;
  j["grey"] = to_string(r.grey.value);
  j["conservative"] = to_string(r.conservative.value);
  j["zero_class"] = to_string(r.zero_class);
  j["heavy"] = to_string(r.heavy.value);
  j["intervals"] = to_string(r.intervals.value);
  j["stationary"] = to_string(r.stationary.value);
  j["dim_upper"] = num(r.dim_upper);
  j["dim_lower"] = num(r.dim_lower);
  j["method"] = to_string(r.method);
  j["evidence"] = to_json(all);
  return j;
}

inline std::string csv_row(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
    if (!quote) {
      s += cells[i];
      continue;
    }
    s += '"';
    for (char c : cells[i]) {
      if (c == '"') s += '"';
      s += c;
    }
    s += '"';
  }
  return s + '\n';
}

inline std::string opt_fmt(const std::optional<double>& x) { return x ? fmt(*x) : ""; }

/// Header plus one row; evidence checkpoints are flattened into one cell.
inline std::string to_csv(const ZeroSetReport& r) {
  const json j = to_json(r);
  std::string ev;
  for (const auto& c : j["evidence"]["checkpoints"]) {
    if (!ev.empty()) ev += ';';
    ev += c["label"].get<std::string>() + '=' +
          (c["value"].is_string() ? c["value"].get<std::string>() : fmt(c["value"].get<double>()));
  }
  return csv_row({"grey", "conservative", "zero_class", "heavy", "intervals", "stationary", "dim_upper",
                  "dim_lower", "method", "evidence"}) +
         csv_row({std::string(to_string(r.grey.value)), std::string(to_string(r.conservative.value)),
                  std::string(to_string(r.zero_class)), std::string(to_string(r.heavy.value)),
                  std::string(to_string(r.intervals.value)), std::string(to_string(r.stationary.value)),
                  opt_fmt(r.dim_upper), opt_fmt(r.dim_lower), std::string(to_string(r.method)), ev});
}

inline std::string intervals_csv(const UncoveredSet& z) {
  std::string s = "lo,hi\n";
  for (const auto& iv : z.intervals) s += fmt(iv.lo) + ',' + fmt(iv.hi) + '\n';
  return s;
}

}  // namespace cbi::report
