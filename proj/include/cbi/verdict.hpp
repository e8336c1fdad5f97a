#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cbi {

/// A named numeric checkpoint recorded while deciding a verdict.
struct Checkpoint {
  std::string label;
  double value = 0.0;
};

/// Ordered list of checkpoints plus free-form notes.
struct Evidence {
  std::vector<Checkpoint> checkpoints;
  std::vector<std::string> notes;

  Evidence& add(std::string label, double value) {
    checkpoints.push_back({std::move(label), value});
    return *this;
  }
  Evidence& note(std::string text) {
    notes.push_back(std::move(text));
    return *this;
  }
  void append(const Evidence& other, std::string_view prefix = {}) {
    for (const auto& c : other.checkpoints) {
      checkpoints.push_back({std::string(prefix) + c.label, c.value});
    }
    for (const auto& n : other.notes) notes.push_back(std::string(prefix) + n);
  }
  bool empty() const { return checkpoints.empty() && notes.empty(); }
};

enum class Answer { Yes, No, Inconclusive };

inline std::string_view to_string(Answer a) {
  switch (a) {
    case Answer::Yes: return "Yes";
    case Answer::No: return "No";
    case Answer::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

/// Tri-state decision with the numbers that support it.
///
/// Every verdict carries at least one checkpoint: the decisive quantity for
/// Yes/No, the last partial result for Inconclusive.
struct Verdict {
  Answer value = Answer::Inconclusive;
  Evidence evidence;

  static Verdict yes(Evidence e) { return make(Answer::Yes, std::move(e)); }
  static Verdict no(Evidence e) { return make(Answer::No, std::move(e)); }
  static Verdict inconclusive(Evidence e) {
    return make(Answer::Inconclusive, std::move(e));
  }
  static Verdict from_bool(bool b, Evidence e) {
    return make(b ? Answer::Yes : Answer::No, std::move(e));
  }

  bool is_yes() const { return value == Answer::Yes; }
  bool is_no() const { return value == Answer::No; }
  bool is_inconclusive() const { return value == Answer::Inconclusive; }

 private:
  static Verdict make(Answer a, Evidence e) {
    if (e.checkpoints.empty()) {
      throw std::logic_error("verdict without a numeric checkpoint");
    }
    return Verdict{a, std::move(e)};
  }
};

}  // namespace cbi
