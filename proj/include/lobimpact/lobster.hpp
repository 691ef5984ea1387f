#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "lobimpact/hawkes.hpp"
#include "lobimpact/lob_model.hpp"

namespace lobimpact {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parses decimal seconds after midnight into integer nanoseconds without going through double.
std::int64_t parse_time_ns(const std::string& text);
std::string format_time_ns(std::int64_t ns);

struct RawMessage {
  std::int64_t time_ns = 0;
  int label = 1;
  std::int64_t order_id = 0;
  double size = 0.0;
  Price price = 0;
  int direction = 1;  // -1 sell (ask side), +1 buy (bid side)
};

struct BookRow {
  std::vector<Price> ask_prices, bid_prices;
  std::vector<double> ask_sizes, bid_sizes;
};

struct JoinedRow {
  long line = 0;  // 1-based line in both files
  RawMessage message;
  BookRow book;
};

struct ParseIssue {
  std::string file;
  long line = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<JoinedRow> rows;
  std::vector<ParseIssue> issues;  // skipped rows
};

// Joins a LOBSTER message file with its order book file row by row. The book file must carry
// at least `depth` levels. Malformed rows are skipped and reported unless strict is set.
ParseResult parse_pair(const std::string& message_path, const std::string& orderbook_path,
                       int depth, bool strict = false);
ParseResult parse_pair(std::istream& messages, std::istream& orderbook, int depth,
                       bool strict = false);

struct ClassifiedEvent {
  std::int64_t time_ns = 0;
  int tie_rank = 0;  // > 0 for events sharing a nanosecond after deduplication
  int event_type = 1;
  StateVariable state;
  double imbalance = 0.0;
  std::int64_t mid2_before = 0;  // twice the mid-price before the event
  std::int64_t mid2 = 0;         // twice the mid-price after the event
  std::vector<double> ask_sizes, bid_sizes;  // raw level volumes after the event
  long source_line = 0;

  double mid() const { return 0.5 * static_cast<double>(mid2); }
  double time_seconds() const;
  bool operator==(const ClassifiedEvent&) const = default;
};

struct ClassifyOptions {
  int n = 2;
  int K = 3;
  Price tick = 100;
  // Keep label 1-3 rows that leave the mid unchanged (plain label mapping).
  bool keep_unmoved_limit_events = false;
};

struct ClassifyResult {
  std::vector<ClassifiedEvent> events;
  StateVariable initial_state;  // state of the reference row
  std::int64_t reference_time_ns = 0;
  long dropped_cross = 0;       // label 6
  long dropped_halt = 0;        // label 7
  long dropped_unmoved = 0;     // label 1-3 rows without a mid change
  long dropped_one_sided = 0;   // rows with an empty best level
  long reference_rows = 0;      // leading row used only as the reference book
};

// Maps labels to event types and attaches states. x1 is the sign of the mid change against the
// previous row, so the first row only provides the reference book.
ClassifyResult classify(const std::vector<JoinedRow>& rows, const ClassifyOptions& options = {});

struct DedupReport {
  long merged_runs = 0;     // runs of equal timestamps collapsed
  long dropped_rows = 0;    // events absorbed into another event or cancelled out
  long residual_ties = 0;   // events given a tie rank
};

// Collapses equal-timestamp runs so that times become strictly increasing.
std::vector<ClassifiedEvent> dedup_and_order(const std::vector<ClassifiedEvent>& events, int K,
                                             DedupReport* report = nullptr);

// Coarsens the tick by an integer multiple m: mid moves count only once they accumulate m ticks,
// and groups of m adjacent levels are merged before the imbalance is recomputed.
std::vector<ClassifiedEvent> renormalise_tick(const std::vector<ClassifiedEvent>& events, int m,
                                              Price tick, int n, int K,
                                              std::int64_t reference_mid2 = 0);

// Normalised interleaved volumes (ask1, bid1, ask2, bid2, ...) over the first n levels.
std::vector<double> normalised_volumes(const ClassifiedEvent& event, int n);

// Calibration-ready history with times in seconds from the reference row.
History to_history(const std::vector<ClassifiedEvent>& events, const StateVariable& initial_state,
                   std::int64_t origin_ns);

// Canonical event CSV: time_ns, tie_rank, event_type, x1, x2, imbalance, mid.
void write_events_csv(std::ostream& out, const std::vector<ClassifiedEvent>& events,
                      const std::vector<std::string>& header_lines = {});
std::vector<ClassifiedEvent> read_events_csv(std::istream& in, int K);
// state_index followed by the 2n normalised volumes.
void write_volumes_csv(std::ostream& out, const std::vector<ClassifiedEvent>& events, int n,
                       const std::vector<std::string>& header_lines = {});

}  // namespace lobimpact
