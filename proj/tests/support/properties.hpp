#pragma once

// Randomized property checks shared by the unit tests (small counts) and the
// acceptance runner (full counts).

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "predictchain/models.hpp"

namespace predictchain::testing {

struct RoundTripReport {
  std::size_t attempted = 0;
  std::size_t checked = 0;    // envelopes that fit the note cap
  std::size_t oversize = 0;   // rejected by the cap, as they should be
  std::size_t failures = 0;
  std::string first_failure;
};
RoundTripReport protocol_round_trip(std::size_t count, std::uint64_t seed);

struct FuzzReport {
  std::size_t inputs = 0;
  std::size_t decoded = 0;
  std::size_t typed_errors = 0;
  std::size_t untyped_errors = 0;  // anything other than predictchain::Error
  std::string first_untyped;
};
FuzzReport protocol_fuzz(std::size_t count, std::uint64_t seed);

struct MonitorReport {
  std::size_t committed = 0;
  std::size_t dispatched_unique = 0;
  std::size_t duplicates = 0;       // ids dispatched more than once
  std::size_t missing = 0;          // committed ids never dispatched
  std::size_t unexpected = 0;       // dispatched ids never committed
  std::size_t restarts = 0;
  std::size_t polls = 0;
  bool ok() const { return committed > 0 && duplicates == 0 && missing == 0 && unexpected == 0; }
};
MonitorReport monitor_exactly_once(std::size_t transactions, double duplicate_probability,
                                   double skip_probability, std::uint64_t seed, bool restart);

struct ConservationReport {
  std::size_t attempted = 0;
  std::size_t committed = 0;
  std::size_t rejected = 0;
  std::int64_t minted = 0;
  std::int64_t balance_sum = 0;  // fee sink included
  bool replay_matches = false;
  bool reopen_matches = false;
  bool ok() const { return balance_sum == minted && replay_matches && reopen_matches; }
};
ConservationReport ledger_conservation(std::size_t transactions, std::uint64_t seed);

struct GradientReport {
  std::size_t cases = 0;
  double max_relative_error = 0.0;
  std::size_t failures = 0;  // cases above the tolerance
};
GradientReport gradient_check(models::Archetype archetype, std::size_t cases, std::uint64_t seed,
                              double tolerance);

struct OrderingReport {
  std::map<std::string, std::vector<double>> losses;  // per archetype, one per seed
  std::map<std::string, double> median;
  std::map<std::string, std::size_t> diverged;
  bool mlp_rejects_multi_step = false;
  bool recurrent_accept_multi_step = false;
  bool ordering_holds = false;
};
/// Default hyperparameters on `csv`; gru and lstm with the default
/// clipping, rnn without.
OrderingReport ordering_experiment(const std::string& csv, const std::vector<std::uint64_t>& seeds);

}  // namespace predictchain::testing
