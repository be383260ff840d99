#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "gpc/splitmerge.hpp"

namespace gpc {

/// Line-delimited JSON trace of a run. Record types, one per line:
///   {"type":"init","k":K_init,"n":N,"seed":s}
///   {"type":"proposal","epoch":e,"kind":"split"|"merge","first":i,"second":j,
///    "log_h":..,"p":..,"u":..,"accepted":..,"veto":..}
///   {"type":"round","epoch":e,"k_before":..,"k_after":..}
///   {"type":"final","k":K}
/// Split indices refer to the components at the start of the round; merge
/// indices refer to the list after that round's splits.
void write_trace(std::ostream& out, std::size_t k_init, std::size_t n, std::uint64_t seed,
                 const std::vector<SplitMergeLog>& logs, std::size_t k_final);

std::string proposal_kind_name(Proposal::Kind kind);

struct ReplaySummary {
  std::size_t k_init = 0;
  std::size_t k_replayed = 0;  // after re-applying every accepted operation
  std::size_t k_logged = 0;    // value in the final record
  std::size_t rounds = 0;
  std::size_t splits = 0;
  std::size_t merges = 0;
};

/// Re-applies the accepted splits and merges to the initial component list.
/// Throws Parse when the stream is malformed or an operation refers to a
/// component that does not exist at that point.
ReplaySummary replay_trace(std::istream& in);

}  // namespace gpc
