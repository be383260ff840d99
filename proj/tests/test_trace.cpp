#include <sstream>
#include <string>

#include "doctest.h"
#include "gpc/datasetio.hpp"
#include "gpc/error.hpp"
#include "gpc/estimate.hpp"
#include "gpc/trace.hpp"

using namespace gpc;

namespace {

ReplaySummary replay_text(const std::string& text) {
  std::istringstream in(text);
  return replay_trace(in);
}

bool rejects(const std::string& text) {
  try {
    replay_text(text);
  } catch (const Error& e) {
    return e.kind() == ErrorKind::Parse;
  }
  return false;
}

const std::string kInit = R"({"type":"init","k":2,"n":10,"seed":1})" "\n";

std::string proposal(int epoch, const char* kind, int first, int second, bool accepted) {
  std::ostringstream s;
  s << R"({"type":"proposal","epoch":)" << epoch << R"(,"kind":")" << kind << R"(","first":)" << first
    << R"(,"second":)" << second << R"(,"log_h":0.5,"p":1,"u":0.2,"accepted":)" << (accepted ? "true" : "false")
    << R"(,"veto":null})" << "\n";
  return s.str();
}

std::string round_rec(int epoch, int before, int after) {
  return R"({"type":"round","epoch":)" + std::to_string(epoch) + R"(,"k_before":)" + std::to_string(before) +
         R"(,"k_after":)" + std::to_string(after) + "}\n";
}

}  // namespace

TEST_CASE("hand-written trace replays") {
  const std::string text = kInit + proposal(1, "split", 0, 0, true) + proposal(1, "split", 1, 1, false) +
                           round_rec(1, 2, 3) + proposal(2, "split", 0, 0, false) + proposal(2, "merge", 0, 2, true) +
                           round_rec(2, 3, 2) + round_rec(3, 2, 2) + R"({"type":"final","k":2})" "\n";
  const auto s = replay_text(text);
  CHECK(s.k_init == 2);
  CHECK(s.k_replayed == 2);
  CHECK(s.k_logged == 2);
  CHECK(s.rounds == 3);
  CHECK(s.splits == 1);
  CHECK(s.merges == 1);
}

TEST_CASE("malformed traces are rejected") {
  const std::string fin = R"({"type":"final","k":2})" "\n";
  CHECK(rejects("not json\n"));
  CHECK(rejects(kInit));
  CHECK(rejects(fin));
  CHECK(rejects(kInit + kInit + fin));
  CHECK(rejects(kInit + proposal(1, "split", 5, 5, true) + round_rec(1, 2, 3) + fin));
  CHECK(rejects(kInit + proposal(1, "split", 0, 0, true) + round_rec(1, 2, 2) + fin));
  CHECK(rejects(kInit + round_rec(1, 3, 3) + fin));
  CHECK(rejects(kInit + proposal(1, "merge", 0, 2, true) + round_rec(1, 2, 1) + fin));
  CHECK(rejects(kInit + proposal(1, "merge", 0, 1, true) + proposal(1, "split", 0, 0, false) + fin));
  CHECK(rejects(kInit + proposal(1, "grow", 0, 0, true) + fin));
  CHECK(rejects(kInit + proposal(1, "split", 0, 0, false) + fin));
  CHECK(rejects(kInit + R"({"type":"round","epoch":1})" "\n" + fin));
  CHECK(rejects(kInit + fin + round_rec(1, 2, 2)));
  try {
    replay_text(kInit + "{bad\n" + fin);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("logged runs replay to their final K") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthSpec spec;
    spec.per_class = 60;
    spec.seed = seed;
    const auto data = gen_synth(spec);
    const auto cons = LabelConstraints::from_labels(data.dataset.labels);
    LoopConfig cfg;
    cfg.replearn = false;
    cfg.epochs = 30;
    cfg.k_init = 6 + 3 * seed;
    const auto res = estimate_k_loop(data.dataset.x, cons, cfg, seed);
    std::ostringstream out;
    write_trace(out, res.k_init, data.dataset.size(), seed, res.logs, res.state.k());
    std::istringstream in(out.str());
    const auto s = replay_trace(in);
    CHECK(s.k_init == res.k_init);
    CHECK(s.k_replayed == res.state.k());
    CHECK(s.k_logged == res.state.k());
    CHECK(s.rounds == res.logs.size());
  }
  CHECK(proposal_kind_name(Proposal::Kind::Split) == "split");
  CHECK(proposal_kind_name(Proposal::Kind::Merge) == "merge");
}
