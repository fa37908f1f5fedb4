#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "carbonsched/errors.hpp"
#include "carbonsched/model.hpp"
#include "carbonsched/rng.hpp"

namespace carbonsched {

// Request-profile generation, forecast perturbation, and the three CSV
// formats the toolkit reads and writes:
//   carbon:     slot,from,to,forecast_g_per_kwh,actual_g_per_kwh
//   requests:   slot,forecast_requests,actual_requests   (actual optional)
//   strategies: id,name,service_time_ms,error_pct        (one decimal digit)

enum class ProfileKind { Stable, Peaky };

struct RequestProfileSpec {
  ProfileKind kind = ProfileKind::Stable;
  std::int64_t base_level = 300;
  std::int64_t peak_level = 1000;            // peaky only
  std::vector<int> peak_slots = {16, 36};    // 08:00 and 18:00 at 30-minute slots
  int peak_width_slots = 4;                  // gaussian sigma
  double noise_pct = 10.0;
  std::uint64_t seed = 0;
};

struct CarbonSlot {
  std::string from;  // ISO-8601, e.g. 2023-01-15T00:00Z
  std::string to;
  std::int64_t forecast_g_per_kwh = 0;
  std::optional<std::int64_t> actual_g_per_kwh;
};

struct CarbonSeries {
  std::string date;  // YYYY-MM-DD of the first slot
  int slot_duration_minutes = 30;
  std::vector<CarbonSlot> slots;
};

struct RequestRecord {
  std::int64_t forecast = 0;
  std::optional<std::int64_t> actual;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

// Days since 1970-01-01 for a proleptic Gregorian date (Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "2023-01-15T00:30Z" -> minutes since the epoch. Seconds, when present,
// must be zero; offsets other than Z are not accepted.
inline std::int64_t parse_iso_minutes(const std::string& ts) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char t = 0, z = 0;
  std::istringstream ss(ts);
  ss >> y;
  if (ss.get() != '-') throw ParseError("bad timestamp: " + ts);
  ss >> mo;
  if (ss.get() != '-') throw ParseError("bad timestamp: " + ts);
  ss >> d >> t >> h;
  if (t != 'T' || ss.get() != ':') throw ParseError("bad timestamp: " + ts);
  ss >> mi;
  if (ss.peek() == ':') {
    ss.get();
    ss >> se;
  }
  ss >> z;
  if (ss.fail() || z != 'Z' || se != 0 || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59)
    throw ParseError("bad timestamp: " + ts);
  return days_from_civil(y, mo, d) * 1440 + h * 60 + mi;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw ParseError("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected integer for " + what + ", got '" + s + "'");
  }
}

// "35.3" -> 353; at most one fractional digit.
inline std::int64_t parse_fixed1(const std::string& s, const std::string& what) {
  if (s.empty() || s[0] == '-')
    throw ParseError(what + " must be a nonnegative decimal, got '" + s + "'");
  const auto dot = s.find('.');
  const std::string whole = dot == std::string::npos ? s : s.substr(0, dot);
  const std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
  if (whole.empty() || frac.size() > 1 || (dot != std::string::npos && frac.empty()))
    throw ParseError("expected a decimal with at most one fractional digit for " + what +
                     ", got '" + s + "'");
  std::int64_t v = parse_int(whole, what) * 10;
  if (v < 0) throw ParseError(what + " must be nonnegative, got '" + s + "'");
  if (!frac.empty()) {
    if (frac[0] < '0' || frac[0] > '9') throw ParseError("bad decimal '" + s + "' for " + what);
    v += frac[0] - '0';
  }
  return v;
}

inline std::string format_fixed1(std::int64_t tenths) {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

// Round half away from zero; pinned rule for perturbed/generated counts.
inline std::int64_t round_count(double v) {
  const std::int64_t r = std::llround(v);
  return r < 0 ? 0 : r;
}

}  // namespace detail

// Deterministic request series from a profile spec. One noise draw per slot,
// in slot order, from SplitMix64(seed); same spec means same series.
inline std::vector<std::int64_t> generate_profile(const RequestProfileSpec& spec, int t) {
  if (t < 1) throw ValidationError("profile length must be at least 1");
  if (spec.base_level <= 0) throw ValidationError("base level must be positive");
  if (spec.noise_pct < 0) throw ValidationError("noise must be nonnegative");
  if (spec.kind == ProfileKind::Peaky) {
    if (spec.peak_level < spec.base_level)
      throw ValidationError("peak level must be at least the base level");
    if (spec.peak_width_slots < 1) throw ValidationError("peak width must be positive");
  }

  SplitMix64 rng(spec.seed);
  std::vector<std::int64_t> series;
  series.reserve(static_cast<std::size_t>(t));
  const double sigma = static_cast<double>(spec.peak_width_slots);
  for (int i = 0; i < t; ++i) {
    double level = static_cast<double>(spec.base_level);
    if (spec.kind == ProfileKind::Peaky) {
      const double height = static_cast<double>(spec.peak_level - spec.base_level);
      for (int p : spec.peak_slots) {
        const double dx = static_cast<double>(i - p);
        level += height * std::exp(-dx * dx / (2.0 * sigma * sigma));
      }
    }
    const double u = rng.next_signed_unit() * spec.noise_pct / 100.0;
    series.push_back(detail::round_count(level * (1.0 + u)));
  }
  return series;
}

inline std::vector<std::int64_t> perturb_series(const std::vector<std::int64_t>& series,
                                                double magnitude_pct, std::uint64_t seed) {
  if (magnitude_pct < 0) throw ValidationError("perturbation magnitude must be nonnegative");
  SplitMix64 rng(seed);
  std::vector<std::int64_t> out;
  out.reserve(series.size());
  for (std::int64_t v : series) {
    const double u = rng.next_signed_unit() * magnitude_pct / 100.0;
    out.push_back(detail::round_count(static_cast<double>(v) * (1.0 + u)));
  }
  return out;
}

// Validates slot intervals: contiguous, non-overlapping, all the same length.
inline void validate_carbon_series(const CarbonSeries& series) {
  if (series.slots.empty()) throw ParseError("carbon series has no slots");
  std::int64_t prev_to = 0;
  std::int64_t duration = 0;
  for (std::size_t i = 0; i < series.slots.size(); ++i) {
    const auto& slot = series.slots[i];
    const std::int64_t from = detail::parse_iso_minutes(slot.from);
    const std::int64_t to = detail::parse_iso_minutes(slot.to);
    if (to <= from) throw ParseError("slot " + std::to_string(i) + " interval is empty or reversed");
    if (i == 0) duration = to - from;
    else {
      if (from != prev_to)
        throw ParseError("slot " + std::to_string(i) + " does not start where slot " +
                         std::to_string(i - 1) + " ends");
      if (to - from != duration)
        throw ParseError("slot " + std::to_string(i) + " has a different duration");
    }
    if (slot.forecast_g_per_kwh < 0 || (slot.actual_g_per_kwh && *slot.actual_g_per_kwh < 0))
      throw ParseError("negative carbon intensity at slot " + std::to_string(i));
    prev_to = to;
  }
  if (duration != series.slot_duration_minutes)
    throw ParseError("carbon series duration field does not match slot intervals");
}

// ---- carbon CSV ----

inline std::string carbon_csv_to_string(const CarbonSeries& series) {
  std::string out = "slot,from,to,forecast_g_per_kwh,actual_g_per_kwh\n";
  for (std::size_t i = 0; i < series.slots.size(); ++i) {
    const auto& s = series.slots[i];
    out += std::to_string(i) + "," + s.from + "," + s.to + "," +
           std::to_string(s.forecast_g_per_kwh) + ",";
    if (s.actual_g_per_kwh) out += std::to_string(*s.actual_g_per_kwh);
    out += "\n";
  }
  return out;
}

inline CarbonSeries carbon_csv_from_lines(const std::vector<std::string>& lines,
                                          const std::string& origin) {
  if (lines.empty() || detail::split_csv_line(lines[0]) !=
                           std::vector<std::string>{"slot", "from", "to", "forecast_g_per_kwh",
                                                    "actual_g_per_kwh"})
    throw ParseError(origin + ": expected carbon CSV header");
  CarbonSeries series;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    auto f = detail::split_csv_line(lines[n]);
    if (f.size() != 5) throw ParseError(origin + ": carbon CSV row " + std::to_string(n) + " malformed");
    if (detail::parse_int(f[0], "slot") != static_cast<std::int64_t>(n - 1))
      throw ParseError(origin + ": carbon CSV slots must be contiguous from 0");
    CarbonSlot slot;
    slot.from = f[1];
    slot.to = f[2];
    slot.forecast_g_per_kwh = detail::parse_int(f[3], "forecast_g_per_kwh");
    if (!f[4].empty()) slot.actual_g_per_kwh = detail::parse_int(f[4], "actual_g_per_kwh");
    series.slots.push_back(std::move(slot));
  }
  if (series.slots.empty()) throw ParseError(origin + ": carbon CSV has no rows");
  const std::int64_t from = detail::parse_iso_minutes(series.slots[0].from);
  const std::int64_t to = detail::parse_iso_minutes(series.slots[0].to);
  series.slot_duration_minutes = static_cast<int>(to - from);
  series.date = series.slots[0].from.substr(0, 10);
  validate_carbon_series(series);
  return series;
}

inline CarbonSeries load_carbon_csv(const std::filesystem::path& path) {
  return carbon_csv_from_lines(detail::read_lines(path), path.string());
}

inline void save_carbon_csv(const std::filesystem::path& path, const CarbonSeries& series) {
  detail::write_file_atomic(path, carbon_csv_to_string(series));
}

// ---- requests CSV ----

inline std::string requests_csv_to_string(const std::vector<RequestRecord>& records) {
  bool any_actual = false;
  for (const auto& r : records) any_actual = any_actual || r.actual.has_value();
  std::string out = any_actual ? "slot,forecast_requests,actual_requests\n"
                               : "slot,forecast_requests\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(records[i].forecast);
    if (any_actual) {
      out += ",";
      if (records[i].actual) out += std::to_string(*records[i].actual);
    }
    out += "\n";
  }
  return out;
}

inline std::vector<RequestRecord> requests_csv_from_lines(const std::vector<std::string>& lines,
                                                          const std::string& origin) {
  if (lines.empty()) throw ParseError(origin + ": empty requests CSV");
  const auto header = detail::split_csv_line(lines[0]);
  bool has_actual = false;
  if (header == std::vector<std::string>{"slot", "forecast_requests", "actual_requests"})
    has_actual = true;
  else if (header != std::vector<std::string>{"slot", "forecast_requests"})
    throw ParseError(origin + ": expected requests CSV header");
  std::vector<RequestRecord> records;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    auto f = detail::split_csv_line(lines[n]);
    if (f.size() != (has_actual ? 3u : 2u))
      throw ParseError(origin + ": requests CSV row " + std::to_string(n) + " malformed");
    if (detail::parse_int(f[0], "slot") != static_cast<std::int64_t>(n - 1))
      throw ParseError(origin + ": requests CSV slots must be contiguous from 0");
    RequestRecord rec;
    rec.forecast = detail::parse_int(f[1], "forecast_requests");
    if (has_actual && !f[2].empty()) rec.actual = detail::parse_int(f[2], "actual_requests");
    records.push_back(rec);
  }
  if (records.empty()) throw ParseError(origin + ": requests CSV has no rows");
  return records;
}

inline std::vector<RequestRecord> load_requests_csv(const std::filesystem::path& path) {
  return requests_csv_from_lines(detail::read_lines(path), path.string());
}

inline void save_requests_csv(const std::filesystem::path& path,
                              const std::vector<RequestRecord>& records) {
  detail::write_file_atomic(path, requests_csv_to_string(records));
}

// ---- strategies CSV ----

inline std::string strategies_csv_to_string(const StrategyCatalog& catalog) {
  std::string out = "id,name,service_time_ms,error_pct\n";
  for (const auto& s : catalog.strategies) {
    out += std::to_string(s.id) + "," + s.name + "," +
           detail::format_fixed1(s.mean_service_time_dms) + "," +
           detail::format_fixed1(s.mean_error_dpct) + "\n";
  }
  return out;
}

inline StrategyCatalog strategies_csv_from_lines(const std::vector<std::string>& lines,
                                                 const std::string& origin) {
  if (lines.empty() || detail::split_csv_line(lines[0]) !=
                           std::vector<std::string>{"id", "name", "service_time_ms", "error_pct"})
    throw ParseError(origin + ": expected strategies CSV header");
  StrategyCatalog catalog;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    auto f = detail::split_csv_line(lines[n]);
    if (f.size() != 4) throw ParseError(origin + ": strategies CSV row " + std::to_string(n) + " malformed");
    StrategyProfile s;
    s.id = static_cast<int>(detail::parse_int(f[0], "id"));
    s.name = f[1];
    s.mean_service_time_dms = detail::parse_fixed1(f[2], "service_time_ms");
    s.mean_error_dpct = detail::parse_fixed1(f[3], "error_pct");
    catalog.strategies.push_back(std::move(s));
  }
  validate_catalog(catalog);
  return catalog;
}

inline StrategyCatalog load_strategies_csv(const std::filesystem::path& path) {
  return strategies_csv_from_lines(detail::read_lines(path), path.string());
}

inline void save_strategies_csv(const std::filesystem::path& path, const StrategyCatalog& catalog) {
  detail::write_file_atomic(path, strategies_csv_to_string(catalog));
}

// ---- horizon assembly ----

enum class SeriesSource { Forecast, ActualOrForecast };

// Zips a carbon series and request records into a Horizon. ActualOrForecast
// takes the actual value where recorded and falls back to the forecast.
inline Horizon build_horizon(const CarbonSeries& carbon, const std::vector<RequestRecord>& requests,
                             SeriesSource source) {
  if (carbon.slots.size() != requests.size())
    throw ValidationError("carbon series has " + std::to_string(carbon.slots.size()) +
                          " slots but requests have " + std::to_string(requests.size()));
  Horizon horizon;
  horizon.slot_duration_minutes = carbon.slot_duration_minutes;
  for (std::size_t i = 0; i < carbon.slots.size(); ++i) {
    SlotForecast slot;
    slot.index = static_cast<int>(i);
    if (source == SeriesSource::ActualOrForecast) {
      slot.carbon_intensity_g_per_kwh =
          carbon.slots[i].actual_g_per_kwh.value_or(carbon.slots[i].forecast_g_per_kwh);
      slot.requests = requests[i].actual.value_or(requests[i].forecast);
    } else {
      slot.carbon_intensity_g_per_kwh = carbon.slots[i].forecast_g_per_kwh;
      slot.requests = requests[i].forecast;
    }
    horizon.slots.push_back(slot);
  }
  return horizon;
}

}  // namespace carbonsched
