#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace softcast {

/// One univariate series. Timestamps are seconds, strictly increasing.
struct RawSeries {
  std::string series_id;
  std::vector<double> timestamps;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// A supervised example: T history values followed by L target values.
struct SeriesWindow {
  std::vector<double> history;
  std::vector<double> target;
  std::string series_id;
  std::size_t origin_index = 0;
};

struct CsvSchema {
  std::string id_column = "series_id";
  std::string time_column = "timestamp";
  std::string value_column = "value";
};

/// Optional plausibility filter; rows outside [min, max] are dropped.
struct PlausibleRange {
  double min = 0.0;
  double max = 0.0;
};

struct IngestResult {
  std::vector<RawSeries> series;
  std::size_t dropped_nonfinite = 0;
  std::size_t dropped_implausible = 0;
  std::size_t dropped_duplicate = 0;
  std::size_t skipped_empty_series = 0;
};

/// Reads `series_id,timestamp,value` style CSV (header required). Timestamps
/// may be integer/real epoch seconds or ISO-8601 (UTC, optional trailing Z).
/// Throws ParseError with the line number on malformed rows.
IngestResult ingest_csv(const std::string& path, const CsvSchema& schema = {},
                        std::optional<PlausibleRange> plausible = std::nullopt);

/// Parses CSV text already in memory (same rules as ingest_csv).
IngestResult parse_csv(const std::string& text, const CsvSchema& schema = {},
                       std::optional<PlausibleRange> plausible = std::nullopt);

/// Writes series in the default schema; timestamps as integer seconds.
void write_csv(const std::string& path, const std::vector<RawSeries>& series);

/// Parses an ISO-8601 instant ("2024-01-02T03:04:05Z" or with a space) to epoch seconds.
std::optional<double> parse_iso8601(const std::string& text);

/// Median spacing between consecutive timestamps (0 for series shorter than 2).
double nominal_interval(const RawSeries& series);

/// Sliding windows of T history + L target values, origins advancing by
/// `stride`. Windows containing any spacing larger than `max_gap` seconds are
/// dropped. A series shorter than T+L yields no windows.
std::vector<SeriesWindow> make_windows(const RawSeries& series, std::size_t T, std::size_t L,
                                       std::size_t stride, double max_gap);

/// Default gap tolerance: 1.5 x the nominal sampling interval.
double default_max_gap(const RawSeries& series);

enum class SyntheticKind { Ar2, Seasonal, RegimeSwitch };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticKind kind);

struct SyntheticParams {
  double level = 140.0;          // series mean, in measurement units
  double ar1 = 1.5;              // AR(2) coefficients of the deviation process
  double ar2 = -0.6;
  double noise_scale = 2.0;      // innovation standard deviation
  double interval_seconds = 300.0;
  double season_amplitude = 30.0;
  double season_period = 288.0;  // samples
  double floor = 40.0;           // sensor floor, regime-switch only
  double ceiling = 400.0;
};

/// Deterministic synthetic series for desk-scale experiments.
///  - ar2: level + stable AR(2) deviation with Gaussian innovations
///  - seasonal: ar2 plus a sinusoid
///  - regime-switch: Markov switching between a low and a high regime, each
///    with its own AR(2) dynamics, plus occasional sharp drops and recoveries
std::vector<RawSeries> gen_synthetic(SyntheticKind kind, std::size_t n_series, std::size_t length,
                                     std::uint64_t seed, const SyntheticParams& params = {});

/// Disjoint series-level partition.
struct SplitSpec {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  std::size_t stride = 1;
};

/// Shuffles ids with `seed` and cuts them by fraction. Every non-empty split
/// fraction gets at least one id when enough ids exist.
SplitSpec split_by_series(const std::vector<RawSeries>& series, double train_fraction,
                          double val_fraction, std::uint64_t seed);

}  // namespace softcast
