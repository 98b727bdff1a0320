#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "racelab/token.hpp"

namespace racelab {

// Thread ids used in traces and witnesses: Function 2 and Function 3.
inline constexpr int kThread2 = 2;
inline constexpr int kThread3 = 3;

using TraceStep = std::pair<int, char>;  // (thread id, token)
using Trace = std::vector<TraceStep>;

struct UnknownPatternError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ground-truth label straight from the 16-cell rule table: a program is buggy
// iff Function 3 reads without any guard, or downs a semaphore that only a
// correct write-then-up in Function 2 can raise.
inline bool label_by_rules(const PatternCase& c) {
  if (c.f3 == F3Kind::R) return true;
  if (c.f3 == F3Kind::DR) return c.f2 != F2Kind::WU;
  return false;  // F3 None or CR never bugs.
}

namespace detail {

inline std::string strip_noise(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (is_noise(c)) continue;
    if (!is_meaningful(c)) {
      throw UnknownPatternError("unknown token '" + std::string(1, c) + "'");
    }
    out.push_back(c);
  }
  return out;
}

inline F2Kind classify_f2(std::string_view ops) {
  if (ops.empty()) return F2Kind::None;
  if (ops == "w") return F2Kind::W;
  if (ops == "wu") return F2Kind::WU;
  if (ops == "uw") return F2Kind::UW;
  throw UnknownPatternError("function 2 tokens '" + std::string(ops) +
                            "' are not one of the known patterns");
}

inline F3Kind classify_f3(std::string_view ops) {
  if (ops.empty()) return F3Kind::None;
  if (ops == "r") return F3Kind::R;
  if (ops == "cr") return F3Kind::CR;
  if (ops == "dr") return F3Kind::DR;
  throw UnknownPatternError("function 3 tokens '" + std::string(ops) +
                            "' are not one of the known patterns");
}

}  // namespace detail

// Visits every order-preserving merge of ops2 and ops3, thread 2 preferred at
// each branch (lexicographic order). The visitor may return false to stop.
// Yields exactly C(m+n, n) merges.
inline void for_each_interleaving(
    std::string_view ops2, std::string_view ops3,
    const std::function<bool(const Trace&)>& visit) {
  Trace prefix;
  prefix.reserve(ops2.size() + ops3.size());
  bool stopped = false;

  auto rec = [&](auto&& self, std::size_t i2, std::size_t i3) -> void {
    if (stopped) return;
    if (i2 == ops2.size() && i3 == ops3.size()) {
      if (!visit(prefix)) stopped = true;
      return;
    }
    if (i2 < ops2.size()) {
      prefix.emplace_back(kThread2, ops2[i2]);
      self(self, i2 + 1, i3);
      prefix.pop_back();
    }
    if (i3 < ops3.size()) {
      prefix.emplace_back(kThread3, ops3[i3]);
      self(self, i2, i3 + 1);
      prefix.pop_back();
    }
  };
  rec(rec, 0, 0);
}

inline std::vector<Trace> enumerate_interleavings(std::string_view ops2,
                                                  std::string_view ops3) {
  std::vector<Trace> out;
  for_each_interleaving(ops2, ops3, [&](const Trace& t) {
    out.push_back(t);
    return true;
  });
  return out;
}

enum class RunOutcome { Complete, UnwrittenRead, Deadlock };

struct Execution {
  Trace trace;
  RunOutcome outcome = RunOutcome::Complete;
};

// Operational state of the two state-touching threads plus the shared
// semaphore and variable. sem_count never goes negative: a thread whose next
// token is 'd' is simply not runnable while the count is zero.
struct ThreadState {
  std::size_t pc2 = 0;
  std::size_t pc3 = 0;
  int sem_count = 0;
  bool var_written = false;
  bool check_armed2 = false;  // a 'c' arms the next read of that thread
  bool check_armed3 = false;
};

// Enumerates every maximal execution of the two (noise-free) token sequences
// under semaphore semantics, depth-first with thread 2 stepped first. Each
// execution ends Complete, at the first unwritten unchecked read, or in a
// deadlock (some thread blocked on 'd' and no runnable thread left). The
// visitor may return false to stop the enumeration.
inline void for_each_execution(
    std::string_view ops2, std::string_view ops3,
    const std::function<bool(const Execution&)>& visit) {
  Trace prefix;
  bool stopped = false;

  auto runnable = [](std::string_view ops, std::size_t pc, int sem) {
    return pc < ops.size() && (ops[pc] != 'd' || sem > 0);
  };

  auto rec = [&](auto&& self, ThreadState st) -> void {
    if (stopped) return;
    bool can2 = runnable(ops2, st.pc2, st.sem_count);
    bool can3 = runnable(ops3, st.pc3, st.sem_count);
    if (!can2 && !can3) {
      bool finished = st.pc2 == ops2.size() && st.pc3 == ops3.size();
      Execution e{prefix,
                  finished ? RunOutcome::Complete : RunOutcome::Deadlock};
      if (!visit(e)) stopped = true;
      return;
    }
    for (int thread : {kThread2, kThread3}) {
      if (stopped) return;
      if (thread == kThread2 && !can2) continue;
      if (thread == kThread3 && !can3) continue;
      ThreadState next = st;
      char tok = thread == kThread2 ? ops2[next.pc2] : ops3[next.pc3];
      bool& armed =
          thread == kThread2 ? next.check_armed2 : next.check_armed3;
      bool bug = false;
      switch (tok) {
        case 'w': next.var_written = true; break;
        case 'u': next.sem_count += 1; break;
        case 'd': next.sem_count -= 1; break;
        case 'c': armed = true; break;
        case 'r':
          bug = !next.var_written && !armed;
          armed = false;
          break;
        default:
          throw UnknownPatternError("unknown token '" + std::string(1, tok) +
                                    "'");
      }
      if (thread == kThread2) {
        next.pc2 += 1;
      } else {
        next.pc3 += 1;
      }
      prefix.emplace_back(thread, tok);
      if (bug) {
        Execution e{prefix, RunOutcome::UnwrittenRead};
        if (!visit(e)) stopped = true;
      } else {
        self(self, next);
      }
      prefix.pop_back();
    }
  };
  rec(rec, ThreadState{});
}

struct Verdict {
  bool buggy = false;
  // First buggy execution in enumeration order (thread 2 preferred); it
  // replays to an unwritten read or a deadlock. Empty if not buggy.
  Trace witness;
};

// Labels a program by exhaustive simulation of every schedule. Noise tokens
// are stripped first; the meaningful residue must form one of the 16 known
// patterns.
inline Verdict label_by_interleaving(std::string_view f2, std::string_view f3) {
  std::string ops2 = detail::strip_noise(f2);
  std::string ops3 = detail::strip_noise(f3);
  (void)detail::classify_f2(ops2);
  (void)detail::classify_f3(ops3);

  Verdict v;
  for_each_execution(ops2, ops3, [&](const Execution& e) {
    if (e.outcome != RunOutcome::Complete) {
      v.buggy = true;
      v.witness = e.trace;
      return false;
    }
    return true;
  });
  return v;
}

// Convenience overload for anything sample-shaped (SimProgram and friends).
template <class Program>
inline Verdict label_by_interleaving(const Program& p) {
  return label_by_interleaving(p.f2, p.f3);
}

}  // namespace racelab
