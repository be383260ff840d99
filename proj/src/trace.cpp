#include "gpc/trace.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "gpc/error.hpp"
#include "json.hpp"

namespace gpc {

using nlohmann::json;

std::string proposal_kind_name(Proposal::Kind kind) {
  return kind == Proposal::Kind::Split ? "split" : "merge";
}

void write_trace(std::ostream& out, std::size_t k_init, std::size_t n, std::uint64_t seed,
                 const std::vector<SplitMergeLog>& logs, std::size_t k_final) {
  out << json{{"type", "init"}, {"k", k_init}, {"n", n}, {"seed", seed}}.dump() << '\n';
  for (const auto& log : logs) {
    for (const auto& p : log.proposals) {
      json rec{{"type", "proposal"},
               {"epoch", log.epoch},
               {"kind", proposal_kind_name(p.kind)},
               {"first", p.first},
               {"second", p.second},
               {"log_h", p.log_h},
               {"p", p.p},
               {"u", p.u},
               {"accepted", p.accepted}};
      rec["veto"] = p.veto_reason ? json(*p.veto_reason) : json(nullptr);
      out << rec.dump() << '\n';
    }
    out << json{{"type", "round"}, {"epoch", log.epoch}, {"k_before", log.k_before}, {"k_after", log.k_after}}.dump()
        << '\n';
  }
  out << json{{"type", "final"}, {"k", k_final}}.dump() << '\n';
}

namespace {

[[noreturn]] void bad(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Parse, "trace line " + std::to_string(line) + ": " + what);
}

}  // namespace

ReplaySummary replay_trace(std::istream& in) {
  ReplaySummary s;
  bool have_init = false, have_final = false;
  // Components are tracked only by position; a round first expands accepted
  // splits in place, then drops the absorbed side of each accepted merge.
  std::size_t k = 0;
  std::vector<bool> split_accepted;
  std::vector<std::size_t> absorbed;
  std::size_t round_k = 0;
  bool in_round = false;
  bool merges_started = false;
  std::size_t after_splits = 0;

  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception& e) {
        bad(lineno, e.what());
      }
      const std::string type = rec.value("type", "");
      if (type == "init") {
        if (have_init) bad(lineno, "duplicate init record");
        have_init = true;
        k = s.k_init = rec.at("k").get<std::size_t>();
        continue;
      }
      if (!have_init) bad(lineno, "record before init");
      if (have_final) bad(lineno, "record after final");
      if (type == "proposal") {
        if (!in_round) {
          in_round = true;
          merges_started = false;
          round_k = k;
          split_accepted.assign(k, false);
          absorbed.clear();
        }
        const std::string kind = rec.at("kind").get<std::string>();
        const auto first = rec.at("first").get<std::size_t>();
        const auto second = rec.at("second").get<std::size_t>();
        const bool accepted = rec.at("accepted").get<bool>();
        if (kind == "split") {
          if (merges_started) bad(lineno, "split after merges in one round");
          if (first != second || first >= round_k) bad(lineno, "split index out of range");
          if (accepted) {
            split_accepted[first] = true;
            ++s.splits;
          }
        } else if (kind == "merge") {
          if (!merges_started) {
            merges_started = true;
            after_splits = 0;
            for (const bool b : split_accepted) after_splits += b ? 2 : 1;
          }
          if (first >= second || second >= after_splits) bad(lineno, "merge indices out of range");
          if (accepted) {
            for (const std::size_t a : absorbed) {
              if (a == first || a == second) bad(lineno, "component merged twice in one round");
            }
            absorbed.push_back(second);
            ++s.merges;
          }
        } else {
          bad(lineno, "unknown proposal kind '" + kind + "'");
        }
        continue;
      }
      if (type == "round") {
        if (!in_round) {
          round_k = k;
          split_accepted.assign(k, false);
          absorbed.clear();
        }
        std::size_t next = 0;
        for (const bool b : split_accepted) next += b ? 2 : 1;
        next -= absorbed.size();
        if (rec.at("k_before").get<std::size_t>() != round_k) bad(lineno, "k_before disagrees with replay");
        if (rec.at("k_after").get<std::size_t>() != next) bad(lineno, "k_after disagrees with replay");
        k = next;
        ++s.rounds;
        in_round = false;
        continue;
      }
      if (type == "final") {
        if (in_round) bad(lineno, "final record inside an open round");
        have_final = true;
        s.k_logged = rec.at("k").get<std::size_t>();
        continue;
      }
      bad(lineno, "unknown record type '" + type + "'");
    }
  } catch (const json::exception& e) {
    bad(lineno, e.what());
  }
  if (!have_init || !have_final) throw Error(ErrorKind::Parse, "trace: missing init or final record");
  s.k_replayed = k;
  return s;
}

}  // namespace gpc
