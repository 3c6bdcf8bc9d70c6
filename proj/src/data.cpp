#include "softcast/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "softcast/error.hpp"
#include "softcast/random.hpp"

namespace softcast {
namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line_no);
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Parses a full numeric token; accepts nan/inf spellings. Returns nullopt for garbage.
std::optional<double> parse_number(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) return std::nullopt;
  return v;
}

struct Row {
  double t;
  double v;
  std::size_t order;
};

}  // namespace

std::optional<double> parse_iso8601(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double s = 0.0;
  char sep = 0;
  int consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d:%lf%n", &y, &mo, &d, &sep, &h, &mi, &s,
                  &consumed) != 7)
    return std::nullopt;
  if (sep != 'T' && sep != ' ') return std::nullopt;
  const std::string rest = text.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest != "Z" && rest != "z") return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s < 0.0 || s >= 61.0) return std::nullopt;
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + s;
}

IngestResult parse_csv(const std::string& text, const CsvSchema& schema,
                       std::optional<PlausibleRange> plausible) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    header = split_csv_line(line, line_no);
    break;
  }
  if (header.empty()) throw ParseError("missing CSV header", line_no);
  for (auto& h : header) h = trim(h);

  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("header has no column '" + name + "'", line_no);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column(schema.id_column);
  const std::size_t t_col = column(schema.time_column);
  const std::size_t v_col = column(schema.value_column);

  IngestResult result;
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> groups;
  std::size_t row_index = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    const std::string id = trim(fields[id_col]);
    if (id.empty()) throw ParseError("empty series id", line_no);

    const std::string ts_text = trim(fields[t_col]);
    auto ts = parse_number(ts_text);
    if (!ts) ts = parse_iso8601(ts_text);
    if (!ts || !std::isfinite(*ts)) throw ParseError("bad timestamp '" + ts_text + "'", line_no);

    const std::string v_text = trim(fields[v_col]);
    double value = std::numeric_limits<double>::quiet_NaN();
    if (!v_text.empty()) {
      const auto v = parse_number(v_text);
      if (!v) throw ParseError("bad value '" + v_text + "'", line_no);
      value = *v;
    }

    auto [it, inserted] = groups.try_emplace(id);
    if (inserted) order.push_back(id);
    if (!std::isfinite(value)) {
      ++result.dropped_nonfinite;
      continue;
    }
    if (plausible && (value < plausible->min || value > plausible->max)) {
      ++result.dropped_implausible;
      continue;
    }
    it->second.push_back({*ts, value, row_index++});
  }

  for (const auto& id : order) {
    auto& rows = groups[id];
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
    RawSeries series;
    series.series_id = id;
    for (const auto& r : rows) {
      if (!series.timestamps.empty() && r.t == series.timestamps.back()) {
        ++result.dropped_duplicate;
        continue;
      }
      series.timestamps.push_back(r.t);
      series.values.push_back(r.v);
    }
    if (series.values.empty()) {
      ++result.skipped_empty_series;
      continue;
    }
    result.series.push_back(std::move(series));
  }
  return result;
}

IngestResult ingest_csv(const std::string& path, const CsvSchema& schema,
                        std::optional<PlausibleRange> plausible) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), schema, plausible);
}

void write_csv(const std::string& path, const std::vector<RawSeries>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "series_id,timestamp,value\n";
  char buf[64];
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, s.values[i]);
      out << s.series_id << ',' << static_cast<long long>(std::llround(s.timestamps[i])) << ','
          << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
    }
  }
}

double nominal_interval(const RawSeries& series) {
  if (series.timestamps.size() < 2) return 0.0;
  std::vector<double> diffs(series.timestamps.size() - 1);
  for (std::size_t i = 1; i < series.timestamps.size(); ++i)
    diffs[i - 1] = series.timestamps[i] - series.timestamps[i - 1];
  const auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return *mid;
}

double default_max_gap(const RawSeries& series) { return 1.5 * nominal_interval(series); }

std::vector<SeriesWindow> make_windows(const RawSeries& series, std::size_t T, std::size_t L,
                                       std::size_t stride, double max_gap) {
  if (T < 1 || L < 1 || stride < 1) throw ContractViolation("make_windows: T, L, stride must be >= 1");
  std::vector<SeriesWindow> windows;
  const std::size_t n = series.size();
  const std::size_t span = T + L;
  if (n < span) return windows;

  // bad[i] counts oversized gaps between samples j-1 and j for j <= i.
  std::vector<std::size_t> bad(n, 0);
  for (std::size_t j = 1; j < n; ++j)
    bad[j] = bad[j - 1] + (series.timestamps[j] - series.timestamps[j - 1] > max_gap ? 1 : 0);

  for (std::size_t origin = 0; origin + span <= n; origin += stride) {
    const std::size_t last = origin + span - 1;
    if (bad[last] - bad[origin] != 0) continue;
    SeriesWindow w;
    w.series_id = series.series_id;
    w.origin_index = origin;
    w.history.assign(series.values.begin() + static_cast<std::ptrdiff_t>(origin),
                     series.values.begin() + static_cast<std::ptrdiff_t>(origin + T));
    w.target.assign(series.values.begin() + static_cast<std::ptrdiff_t>(origin + T),
                    series.values.begin() + static_cast<std::ptrdiff_t>(origin + span));
    windows.push_back(std::move(w));
  }
  return windows;
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "ar2") return SyntheticKind::Ar2;
  if (name == "seasonal") return SyntheticKind::Seasonal;
  if (name == "regime-switch") return SyntheticKind::RegimeSwitch;
  throw ConfigError("unknown synthetic kind '" + name + "' (expected ar2, seasonal, regime-switch)");
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::Ar2:
      return "ar2";
    case SyntheticKind::Seasonal:
      return "seasonal";
    case SyntheticKind::RegimeSwitch:
      return "regime-switch";
  }
  return "?";
}

namespace {

constexpr double kEpochBase = 1.7e9;
constexpr std::size_t kBurnIn = 200;

RawSeries ar_series(const SyntheticParams& p, std::size_t length, Rng& rng, bool seasonal) {
  RawSeries s;
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < kBurnIn; ++i) {
    const double d = p.ar1 * d1 + p.ar2 * d2 + p.noise_scale * rng.normal();
    d2 = d1;
    d1 = d;
  }
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < length; ++i) {
    const double d = p.ar1 * d1 + p.ar2 * d2 + p.noise_scale * rng.normal();
    d2 = d1;
    d1 = d;
    double v = p.level + d;
    if (seasonal)
      v += p.season_amplitude *
           std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / p.season_period + phase);
    s.values.push_back(v);
  }
  return s;
}

RawSeries regime_switch_series(const SyntheticParams& p, std::size_t length, Rng& rng) {
  // Two regimes around level -/+ 35 with different AR dynamics; the regime
  // mean is approached gradually. Drops: a smooth fall of 50-90 units over
  // 12 steps, a 6-step trough, then a 24-step recovery.
  struct Regime {
    double offset, a1, a2;
  };
  const Regime regimes[2] = {{-35.0, 1.4, -0.5}, {35.0, 1.6, -0.7}};
  constexpr double kSwitchProb = 0.01;
  constexpr double kDropProb = 0.008;
  constexpr int kFall = 12, kHold = 6, kRise = 24;

  RawSeries s;
  int regime = static_cast<int>(rng.index(2));
  double mean = p.level + regimes[regime].offset;
  double d1 = 0.0, d2 = 0.0;
  int drop_step = -1;
  double drop_depth = 0.0;

  for (std::size_t i = 0; i < kBurnIn + length; ++i) {
    if (rng.uniform() < kSwitchProb) regime = 1 - regime;
    const Regime& r = regimes[regime];
    mean += 0.08 * (p.level + r.offset - mean);
    const double d = r.a1 * d1 + r.a2 * d2 + p.noise_scale * rng.normal();
    d2 = d1;
    d1 = d;

    if (drop_step < 0 && rng.uniform() < kDropProb) {
      drop_step = 0;
      drop_depth = rng.uniform(50.0, 90.0);
    }
    double drop = 0.0;
    if (drop_step >= 0) {
      if (drop_step < kFall)
        drop = drop_depth * 0.5 * (1.0 - std::cos(std::numbers::pi * (drop_step + 1) / kFall));
      else if (drop_step < kFall + kHold)
        drop = drop_depth;
      else
        drop = drop_depth * 0.5 *
               (1.0 + std::cos(std::numbers::pi * (drop_step - kFall - kHold + 1) / kRise));
      if (++drop_step >= kFall + kHold + kRise) drop_step = -1;
    }
    if (i >= kBurnIn) s.values.push_back(std::clamp(mean + d - drop, p.floor, p.ceiling));
  }
  return s;
}

}  // namespace

std::vector<RawSeries> gen_synthetic(SyntheticKind kind, std::size_t n_series, std::size_t length,
                                     std::uint64_t seed, const SyntheticParams& params) {
  std::vector<RawSeries> out;
  out.reserve(n_series);
  for (std::size_t k = 0; k < n_series; ++k) {
    Rng rng(mix_seed(seed, k));
    RawSeries s;
    switch (kind) {
      case SyntheticKind::Ar2:
        s = ar_series(params, length, rng, false);
        break;
      case SyntheticKind::Seasonal:
        s = ar_series(params, length, rng, true);
        break;
      case SyntheticKind::RegimeSwitch:
        s = regime_switch_series(params, length, rng);
        break;
    }
    char id[32];
    std::snprintf(id, sizeof id, "%s-%04zu", to_string(kind).c_str(), k);
    s.series_id = id;
    s.timestamps.resize(length);
    const double start = kEpochBase + static_cast<double>(k) * 1.0e6;
    for (std::size_t i = 0; i < length; ++i)
      s.timestamps[i] = start + static_cast<double>(i) * params.interval_seconds;
    out.push_back(std::move(s));
  }
  return out;
}

SplitSpec split_by_series(const std::vector<RawSeries>& series, double train_fraction,
                          double val_fraction, std::uint64_t seed) {
  if (train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0)
    throw ConfigError("split fractions must satisfy train > 0, val >= 0, train + val <= 1");
  std::vector<std::string> ids;
  ids.reserve(series.size());
  for (const auto& s : series) ids.push_back(s.series_id);
  Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.index(i)]);

  const std::size_t n = ids.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  const bool want_test = train_fraction + val_fraction < 1.0;
  if (n >= 3) {
    n_train = std::max<std::size_t>(n_train, 1);
    if (val_fraction > 0.0) n_val = std::max<std::size_t>(n_val, 1);
    if (want_test && n_train + n_val >= n) {
      if (n_train > n_val && n_train > 1) --n_train; else if (n_val > 1) --n_val;
    }
  }
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);

  SplitSpec split;
  split.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                       ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
  return split;
}

}  // namespace softcast
