#include "lobimpact/lobster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace lobimpact {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = 0;
    while (start < field.size() && field[start] == ' ') ++start;
    out.push_back(field.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_integer(const std::string& s, const char* what) {
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(std::string("malformed ") + what + " '" + s + "'");
  return v;
}

double parse_real(const std::string& s, const char* what) {
  if (s.empty()) throw ParseError(std::string("empty ") + what);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError(std::string("malformed ") + what + " '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v))
    throw ParseError(std::string("malformed ") + what + " '" + s + "'");
  return v;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\r' || c == '\t'; });
}

RawMessage parse_message(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() < 6) throw ParseError("message row needs 6 columns, found " + std::to_string(f.size()));
  RawMessage m;
  m.time_ns = parse_time_ns(f[0]);
  m.label = parse_integer<int>(f[1], "event label");
  if (m.label < 1 || m.label > 7) throw ParseError("event label outside 1..7");
  m.order_id = parse_integer<std::int64_t>(f[2], "order id");
  m.size = parse_real(f[3], "size");
  m.price = parse_integer<Price>(f[4], "price");
  m.direction = parse_integer<int>(f[5], "direction");
  if (m.direction != 1 && m.direction != -1) throw ParseError("direction must be 1 or -1");
  if (m.label <= 5 && m.price <= 0) throw ParseError("price must be positive");
  return m;
}

BookRow parse_book(const std::string& line, int depth) {
  const auto f = split_csv(line);
  if (static_cast<int>(f.size()) < 4 * depth)
    throw ParseError("order book row needs " + std::to_string(4 * depth) + " columns, found " +
                     std::to_string(f.size()));
  BookRow b;
  for (int l = 0; l < depth; ++l) {
    b.ask_prices.push_back(parse_integer<Price>(f[4 * l], "ask price"));
    b.ask_sizes.push_back(parse_real(f[4 * l + 1], "ask size"));
    b.bid_prices.push_back(parse_integer<Price>(f[4 * l + 2], "bid price"));
    b.bid_sizes.push_back(parse_real(f[4 * l + 3], "bid size"));
    if (b.ask_sizes.back() < 0.0 || b.bid_sizes.back() < 0.0)
      throw ParseError("negative volume");
  }
  return b;
}

int sign(std::int64_t v) { return (v > 0) - (v < 0); }

double imbalance_of(const std::vector<double>& asks, const std::vector<double>& bids, int n) {
  if (static_cast<int>(asks.size()) < n || static_cast<int>(bids.size()) < n)
    throw std::invalid_argument("book has fewer than n levels");
  double a = 0.0, b = 0.0;
  for (int i = 0; i < n; ++i) {
    a += asks[i];
    b += bids[i];
  }
  if (a + b <= 0.0) throw std::domain_error("empty book");
  return (b - a) / (b + a);
}

int market_type(const RawMessage& m) {
  const bool bid = m.direction > 0;
  switch (m.label) {
    case 1: return bid ? kInflationary : kDeflationary;
    case 2:
    case 3: return bid ? kDeflationary : kInflationary;
    case 4:
    case 5: return bid ? kSellMarket : kBuyMarket;
    default: return 0;
  }
}

bool is_execution(int type) { return type == kSellMarket || type == kBuyMarket; }

ClassifiedEvent merge_span(const std::vector<ClassifiedEvent>& run, std::size_t first,
                           std::size_t last, int type, int K) {
  ClassifiedEvent e = run[last];
  e.event_type = type;
  e.mid2_before = run[first].mid2_before;
  e.state = StateVariable{sign(e.mid2 - e.mid2_before), discretise_imbalance(e.imbalance, K), K};
  return e;
}

std::string format_mid(std::int64_t mid2) {
  std::string s = std::to_string(mid2 / 2);
  if (mid2 % 2 != 0) s += ".5";
  return s;
}

std::int64_t parse_mid2(const std::string& s) {
  const auto dot = s.find('.');
  const std::int64_t whole = parse_integer<std::int64_t>(s.substr(0, dot), "mid");
  if (dot == std::string::npos) return 2 * whole;
  const std::string frac = s.substr(dot + 1);
  if (frac == "5") return 2 * whole + 1;
  if (frac.find_first_not_of('0') == std::string::npos) return 2 * whole;
  throw ParseError("mid must lie on the half-tick grid: '" + s + "'");
}

}  // namespace

std::int64_t parse_time_ns(const std::string& text) {
  const auto dot = text.find('.');
  const std::string whole = text.substr(0, dot);
  std::int64_t ns = parse_integer<std::int64_t>(whole, "time") * 1000000000LL;
  if (ns < 0) throw ParseError("negative time");
  if (dot != std::string::npos) {
    std::string frac = text.substr(dot + 1);
    if (frac.empty() || frac.size() > 9 || frac.find_first_not_of("0123456789") != std::string::npos)
      throw ParseError("malformed time '" + text + "'");
    frac.resize(9, '0');
    ns += parse_integer<std::int64_t>(frac, "time");
  }
  return ns;
}

std::string format_time_ns(std::int64_t ns) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%lld.%09lld", static_cast<long long>(ns / 1000000000LL),
                static_cast<long long>(ns % 1000000000LL));
  return buf;
}

ParseResult parse_pair(std::istream& messages, std::istream& orderbook, int depth, bool strict) {
  if (depth < 1) throw std::invalid_argument("depth must be positive");
  ParseResult out;
  std::string ml, bl;
  long line = 0;
  long message_rows = 0, book_rows = 0;
  while (true) {
    const bool got_m = static_cast<bool>(std::getline(messages, ml));
    const bool got_b = static_cast<bool>(std::getline(orderbook, bl));
    if (!got_m && !got_b) break;
    ++line;
    if (got_m && !blank(ml)) ++message_rows;
    if (got_b && !blank(bl)) ++book_rows;
    if (!got_m || !got_b || blank(ml) || blank(bl)) {
      if (got_m && got_b && blank(ml) && blank(bl)) continue;
      // Count what is left so the error names both totals.
      while (std::getline(messages, ml))
        if (!blank(ml)) ++message_rows;
      while (std::getline(orderbook, bl))
        if (!blank(bl)) ++book_rows;
      if (message_rows != book_rows)
        throw ParseError("row count mismatch: message file has " + std::to_string(message_rows) +
                         " rows, order book file has " + std::to_string(book_rows));
      throw ParseError("blank line inside the data at line " + std::to_string(line));
    }
    JoinedRow row;
    row.line = line;
    try {
      row.message = parse_message(ml);
    } catch (const ParseError& e) {
      if (strict) throw ParseError("message file line " + std::to_string(line) + ": " + e.what());
      out.issues.push_back({"message", line, e.what()});
      continue;
    }
    try {
      row.book = parse_book(bl, depth);
    } catch (const ParseError& e) {
      if (strict) throw ParseError("order book file line " + std::to_string(line) + ": " + e.what());
      out.issues.push_back({"orderbook", line, e.what()});
      continue;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

ParseResult parse_pair(const std::string& message_path, const std::string& orderbook_path,
                       int depth, bool strict) {
  std::ifstream m(message_path), b(orderbook_path);
  if (!m) throw ParseError("cannot open message file " + message_path);
  if (!b) throw ParseError("cannot open order book file " + orderbook_path);
  return parse_pair(m, b, depth, strict);
}

double ClassifiedEvent::time_seconds() const {
  return static_cast<double>(time_ns) * 1e-9 + tie_rank * 1e-10;
}

ClassifyResult classify(const std::vector<JoinedRow>& rows, const ClassifyOptions& opt) {
  if (opt.n < 1) throw std::invalid_argument("depth n must be positive");
  if (opt.K < 1 || opt.K % 2 == 0) throw std::invalid_argument("K must be odd and positive");
  ClassifyResult out;
  bool have_reference = false;
  std::int64_t prev_mid2 = 0;
  std::int64_t prev_time = 0;
  for (const auto& row : rows) {
    const auto& b = row.book;
    if (have_reference && row.message.time_ns < prev_time)
      throw std::invalid_argument("rows are not ordered by time (line " + std::to_string(row.line) + ")");
    prev_time = row.message.time_ns;
    if (b.ask_sizes.empty() || b.bid_sizes.empty() || b.ask_sizes[0] <= 0.0 ||
        b.bid_sizes[0] <= 0.0) {
      ++out.dropped_one_sided;
      continue;
    }
    const std::int64_t mid2 = b.ask_prices[0] + b.bid_prices[0];
    const double imbalance = imbalance_of(b.ask_sizes, b.bid_sizes, opt.n);
    if (!have_reference) {
      have_reference = true;
      ++out.reference_rows;
      out.reference_time_ns = row.message.time_ns;
      out.initial_state = StateVariable{0, discretise_imbalance(imbalance, opt.K), opt.K};
      prev_mid2 = mid2;
      continue;
    }
    const int label = row.message.label;
    const int x1 = sign(mid2 - prev_mid2);
    const std::int64_t before = prev_mid2;
    prev_mid2 = mid2;
    if (label == 6) {
      ++out.dropped_cross;
      continue;
    }
    if (label == 7) {
      ++out.dropped_halt;
      continue;
    }
    if (label <= 3 && x1 == 0 && !opt.keep_unmoved_limit_events) {
      ++out.dropped_unmoved;
      continue;
    }
    ClassifiedEvent e;
    e.time_ns = row.message.time_ns;
    e.event_type = market_type(row.message);
    e.state = StateVariable{x1, discretise_imbalance(imbalance, opt.K), opt.K};
    e.imbalance = imbalance;
    e.mid2_before = before;
    e.mid2 = mid2;
    e.ask_sizes = b.ask_sizes;
    e.bid_sizes = b.bid_sizes;
    e.source_line = row.line;
    out.events.push_back(std::move(e));
  }
  return out;
}

std::vector<ClassifiedEvent> dedup_and_order(const std::vector<ClassifiedEvent>& events, int K,
                                             DedupReport* report) {
  DedupReport rep;
  std::vector<ClassifiedEvent> out;
  std::size_t i = 0;
  while (i < events.size()) {
    std::size_t j = i + 1;
    while (j < events.size() && events[j].time_ns == events[i].time_ns) ++j;
    if (j < events.size() && events[j].time_ns < events[i].time_ns)
      throw std::invalid_argument("event times must be non-decreasing");
    if (j - i == 1) {
      out.push_back(events[i]);
      out.back().tie_rank = 0;
      i = j;
      continue;
    }
    ++rep.merged_runs;
    const std::vector<ClassifiedEvent> run(events.begin() + i, events.begin() + j);
    std::size_t emitted = 0;
    const auto first_exec = std::find_if(run.begin(), run.end(),
                                         [](const ClassifiedEvent& e) { return is_execution(e.event_type); });
    if (first_exec == run.end()) {
      const std::int64_t net = run.back().mid2 - run.front().mid2_before;
      if (net != 0) {
        out.push_back(merge_span(run, 0, run.size() - 1, net < 0 ? kDeflationary : kInflationary, K));
        out.back().tie_rank = 0;
        emitted = 1;
      }
    } else {
      // One event per run of same-side executions; price moves join the preceding execution.
      std::size_t start = 0;
      int side = first_exec->event_type;
      int rank = 0;
      for (std::size_t k = 0; k <= run.size(); ++k) {
        const bool boundary = k == run.size() ||
                              (is_execution(run[k].event_type) && run[k].event_type != side &&
                               k > static_cast<std::size_t>(first_exec - run.begin()));
        if (!boundary) continue;
        out.push_back(merge_span(run, start, k - 1, side, K));
        out.back().tie_rank = rank++;
        ++emitted;
        if (k < run.size()) {
          start = k;
          side = run[k].event_type;
        }
      }
    }
    rep.dropped_rows += static_cast<long>(run.size() - emitted);
    if (emitted > 1) rep.residual_ties += static_cast<long>(emitted - 1);
    i = j;
  }
  if (report) *report = rep;
  return out;
}

std::vector<ClassifiedEvent> renormalise_tick(const std::vector<ClassifiedEvent>& events, int m,
                                              Price tick, int n, int K,
                                              std::int64_t reference_mid2) {
  if (m < 1) throw std::invalid_argument("tick multiple must be a positive integer");
  if (tick <= 0) throw std::invalid_argument("tick must be positive");
  if (m == 1 || events.empty()) return events;
  const std::int64_t threshold = 2 * static_cast<std::int64_t>(m) * tick;
  std::int64_t ref = reference_mid2 != 0 ? reference_mid2 : events.front().mid2_before;
  std::vector<ClassifiedEvent> out;
  for (const auto& ev : events) {
    ClassifiedEvent e = ev;
    const std::int64_t cum = e.mid2 - ref;
    const bool moved = std::abs(cum) >= threshold;
    const bool price_event = !is_execution(e.event_type);
    if (price_event && !moved) continue;
    e.mid2_before = ref;
    if (moved) ref = e.mid2;
    std::vector<double> asks, bids;
    const std::size_t levels = std::min(e.ask_sizes.size(), e.bid_sizes.size()) / m;
    if (static_cast<int>(levels) < n)
      throw std::invalid_argument("book depth is below n times the tick multiple");
    for (std::size_t l = 0; l < levels; ++l) {
      double a = 0.0, b = 0.0;
      for (int k = 0; k < m; ++k) {
        a += e.ask_sizes[l * m + k];
        b += e.bid_sizes[l * m + k];
      }
      asks.push_back(a);
      bids.push_back(b);
    }
    e.ask_sizes = asks;
    e.bid_sizes = bids;
    e.imbalance = imbalance_of(asks, bids, n);
    e.state = StateVariable{moved ? sign(cum) : 0, discretise_imbalance(e.imbalance, K), K};
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<double> normalised_volumes(const ClassifiedEvent& event, int n) {
  if (static_cast<int>(event.ask_sizes.size()) < n || static_cast<int>(event.bid_sizes.size()) < n)
    throw std::invalid_argument("event book has fewer than n levels");
  std::vector<double> v;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    v.push_back(event.ask_sizes[i]);
    v.push_back(event.bid_sizes[i]);
    total += event.ask_sizes[i] + event.bid_sizes[i];
  }
  if (!(total > 0.0)) throw std::domain_error("empty book");
  for (double& x : v) x /= total;
  return v;
}

History to_history(const std::vector<ClassifiedEvent>& events, const StateVariable& initial_state,
                   std::int64_t origin_ns) {
  History h;
  h.initial_state = initial_state.index();
  for (const auto& e : events) {
    if (e.time_ns < origin_ns) throw std::invalid_argument("event precedes the time origin");
    const double t = static_cast<double>(e.time_ns - origin_ns) * 1e-9 + e.tie_rank * 1e-10;
    h.events.push_back({t, e.event_type, e.state.index()});
  }
  return h;
}

void write_events_csv(std::ostream& out, const std::vector<ClassifiedEvent>& events,
                      const std::vector<std::string>& header_lines) {
  for (const auto& h : header_lines) out << "# " << h << '\n';
  out << "time_ns,tie_rank,event_type,x1,x2,imbalance,mid\n";
  char buf[64];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%.17g", e.imbalance);
    out << e.time_ns << ',' << e.tie_rank << ',' << e.event_type << ',' << e.state.x1 << ','
        << e.state.x2 << ',' << buf << ',' << format_mid(e.mid2) << '\n';
  }
}

std::vector<ClassifiedEvent> read_events_csv(std::istream& in, int K) {
  std::vector<ClassifiedEvent> out;
  std::string line;
  long number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line) || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("time_ns,", 0) != 0) throw ParseError("event file lacks its column header");
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 7)
      throw ParseError("event file line " + std::to_string(number) + ": expected 7 columns");
    try {
      ClassifiedEvent e;
      e.time_ns = parse_integer<std::int64_t>(f[0], "time_ns");
      e.tie_rank = parse_integer<int>(f[1], "tie_rank");
      e.event_type = parse_integer<int>(f[2], "event_type");
      if (e.event_type < 0 || e.event_type > 4) throw ParseError("event type outside 0..4");
      const int x1 = parse_integer<int>(f[3], "x1");
      const int x2 = parse_integer<int>(f[4], "x2");
      if (x1 < -1 || x1 > 1 || std::abs(x2) > (K - 1) / 2) throw ParseError("state out of range");
      e.state = StateVariable{x1, x2, K};
      e.imbalance = parse_real(f[5], "imbalance");
      e.mid2 = parse_mid2(f[6]);
      e.mid2_before = out.empty() ? e.mid2 : out.back().mid2;
      e.source_line = number;
      out.push_back(std::move(e));
    } catch (const ParseError& err) {
      throw ParseError("event file line " + std::to_string(number) + ": " + err.what());
    }
  }
  if (!header) throw ParseError("event file lacks its column header");
  return out;
}

void write_volumes_csv(std::ostream& out, const std::vector<ClassifiedEvent>& events, int n,
                       const std::vector<std::string>& header_lines) {
  for (const auto& h : header_lines) out << "# " << h << '\n';
  out << "state_index";
  for (int i = 1; i <= n; ++i) out << ",ask" << i << ",bid" << i;
  out << '\n';
  char buf[64];
  for (const auto& e : events) {
    out << e.state.index();
    for (double v : normalised_volumes(e, n)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace lobimpact
