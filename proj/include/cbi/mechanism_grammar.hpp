#pragma once

// Text form of built-in mechanisms:
//
//   stable:d=1.0,alpha=2.0     quadratic:b=0,sigma2=2      (branching)
//   stable:d=0.5,beta=1        gamma:a=1,b=1
//   lamperti:beta=0.5          cpp:mass=2        zero      (immigration)
//
// Numbers are printed in shortest round-trip form, so parse(print(m)) == m.

#include <cctype>
#include <charconv>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "cbi/mechanisms.hpp"

namespace cbi {

class MechanismParseError : public std::invalid_argument {
 public:
  MechanismParseError(std::size_t position, const std::string& what)
      : std::invalid_argument("mechanism spec, position " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

enum class MechanismRole { Branching, Immigration };

namespace grammar_detail {

struct Field {
  double value;
  std::size_t position;
};

struct Parsed {
  std::string family;
  std::map<std::string, Field, std::less<>> fields;
};

inline Parsed split(std::string_view spec) {
  Parsed out;
  const auto colon = spec.find(':');
  out.family = std::string(spec.substr(0, colon));
  if (out.family.empty()) throw MechanismParseError(0, "missing family name");
  for (char ch : out.family) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) {
      throw MechanismParseError(0, "malformed family name '" + out.family + "'");
    }
  }
  if (colon == std::string_view::npos) return out;
  std::size_t pos = colon + 1;
  if (pos == spec.size()) throw MechanismParseError(pos, "expected key=value after ':'");
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto end = comma == std::string_view::npos ? spec.size() : comma;
    const auto item = spec.substr(pos, end - pos);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw MechanismParseError(pos, "malformed key in '" + std::string(item) + "'");
    }
    const std::string key(item.substr(0, eq));
    for (char ch : key) {
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) {
        throw MechanismParseError(pos, "malformed key '" + key + "'");
      }
    }
    const auto text = item.substr(eq + 1);
    const std::size_t vpos = pos + eq + 1;
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      throw MechanismParseError(vpos, "malformed number '" + std::string(text) + "'");
    }
    if (!out.fields.emplace(key, Field{v, vpos}).second) {
      throw MechanismParseError(pos, "duplicate key '" + key + "'");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

class FieldReader {
 public:
  explicit FieldReader(Parsed p) : p_(std::move(p)) {}

  double get(std::string_view key, double fallback) {
    auto it = p_.fields.find(key);
    if (it == p_.fields.end()) return fallback;
    used_.push_back(it->first);
    return it->second.value;
  }
  /// Accepts either of two spellings for the same parameter.
  double get(std::string_view key, std::string_view alias, double fallback) {
    if (p_.fields.count(key) && p_.fields.count(alias)) {
      throw MechanismParseError(p_.fields.find(alias)->second.position,
                                "both '" + std::string(key) + "' and '" + std::string(alias) + "' given");
    }
    return p_.fields.count(alias) ? get(alias, fallback) : get(key, fallback);
  }
  void finish() const {
    for (const auto& [k, f] : p_.fields) {
      bool ok = false;
      for (const auto& u : used_) ok = ok || u == k;
      if (!ok) throw MechanismParseError(f.position, "unknown key '" + k + "' for family " + p_.family);
    }
  }
  std::size_t value_position() const {
    return p_.fields.empty() ? 0 : p_.fields.begin()->second.position;
  }

 private:
  Parsed p_;
  std::vector<std::string> used_;
};

template <class Build>
auto checked(FieldReader& r, Build&& build) {
  r.finish();
  try {
    return build();
  } catch (const std::domain_error& e) {
    throw MechanismParseError(r.value_position(), std::string("out of range: ") + e.what());
  }
}

inline std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace grammar_detail

inline BranchingMechanism parse_branching(std::string_view spec) {
  using namespace grammar_detail;
  auto parsed = split(spec);
  const std::string family = parsed.family;
  FieldReader r(std::move(parsed));
  if (family == "stable") {
    const double d = r.get("d", 1.0);
    const double alpha = r.get("alpha", 2.0);
    return checked(r, [&] { return BranchingMechanism::stable(d, alpha); });
  }
  if (family == "quadratic") {
    const double b = r.get("b", 0.0);
    const double sigma2 = r.get("sigma2", 2.0);
    return checked(r, [&] { return BranchingMechanism::quadratic(b, sigma2); });
  }
  throw MechanismParseError(0, "unknown branching family '" + family + "'");
}

inline ImmigrationMechanism parse_immigration(std::string_view spec) {
  using namespace grammar_detail;
  auto parsed = split(spec);
  const std::string family = parsed.family;
  FieldReader r(std::move(parsed));
  if (family == "stable") {
    const double d = r.get("d", "dprime", 1.0);
    const double beta = r.get("beta", 1.0);
    return checked(r, [&] { return ImmigrationMechanism::stable(d, beta); });
  }
  if (family == "gamma") {
    const double a = r.get("a", 1.0);
    const double b = r.get("b", 1.0);
    return checked(r, [&] { return ImmigrationMechanism::gamma(a, b); });
  }
  if (family == "lamperti") {
    const double beta = r.get("beta", 0.5);
    const double scale = r.get("scale", 1.0);
    return checked(r, [&] { return ImmigrationMechanism::lamperti(beta, scale); });
  }
  if (family == "cpp") {
    const double mass = r.get("mass", 1.0);
    return checked(r, [&] { return ImmigrationMechanism::compound_poisson(mass); });
  }
  if (family == "zero") {
    return checked(r, [] { return ImmigrationMechanism::zero(); });
  }
  throw MechanismParseError(0, "unknown immigration family '" + family + "'");
}

using AnyMechanism = std::variant<BranchingMechanism, ImmigrationMechanism>;

inline AnyMechanism parse_mechanism(std::string_view spec, MechanismRole role) {
  if (role == MechanismRole::Branching) return parse_branching(spec);
  return parse_immigration(spec);
}

inline std::string to_string(const BranchingMechanism& m) {
  using grammar_detail::num;
  if (auto* s = std::get_if<StablePower>(&m.family())) {
    return "stable:d=" + num(s->d) + ",alpha=" + num(s->alpha);
  }
  if (auto* q = std::get_if<Quadratic>(&m.family())) {
    return "quadratic:b=" + num(q->b) + ",sigma2=" + num(q->sigma2);
  }
  throw std::invalid_argument("custom branching mechanisms have no text form");
}

inline std::string to_string(const ImmigrationMechanism& m) {
  using grammar_detail::num;
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, StableImmigration>) {
          return "stable:d=" + num(f.dprime) + ",beta=" + num(f.beta);
        } else if constexpr (std::is_same_v<T, GammaImmigration>) {
          return "gamma:a=" + num(f.a) + ",b=" + num(f.b);
        } else if constexpr (std::is_same_v<T, LampertiStable>) {
          std::string s = "lamperti:beta=" + num(f.beta);
          if (f.scale != 1.0) s += ",scale=" + num(f.scale);
          return s;
        } else if constexpr (std::is_same_v<T, CompoundPoisson>) {
          if (!f.default_jumps) {
            throw std::invalid_argument("compound Poisson with custom jumps has no text form");
          }
          return "cpp:mass=" + num(f.mass);
        } else if constexpr (std::is_same_v<T, ZeroImmigration>) {
          return "zero";
        } else {
          throw std::invalid_argument("custom immigration mechanisms have no text form");
        }
      },
      m.family());
}

}  // namespace cbi
