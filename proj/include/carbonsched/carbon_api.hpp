#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "carbonsched/errors.hpp"
#include "carbonsched/workload.hpp"

namespace carbonsched {

// Client for the national grid carbon-intensity API: JSON wire-format
// parsing plus a cached, offline-by-default day fetcher.

// Wire format: {"data": [{"from": ..., "to": ...,
//   "intensity": {"forecast": N, "actual": N|null, "index": "..."}}, ...]}
// The qualitative "index" is ignored; intensity bands are explicit
// configuration in this toolkit.
inline CarbonSeries parse_carbon_api_json(const std::string& document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("carbon API document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array())
    throw ParseError("carbon API document has no 'data' array");
  const auto& data = doc["data"];
  if (data.empty()) throw ParseError("carbon API 'data' array is empty");

  CarbonSeries series;
  try {
    for (const auto& record : data) {
      CarbonSlot slot;
      slot.from = record.at("from").get<std::string>();
      slot.to = record.at("to").get<std::string>();
      const auto& intensity = record.at("intensity");
      slot.forecast_g_per_kwh = intensity.at("forecast").get<std::int64_t>();
      if (intensity.contains("actual") && !intensity["actual"].is_null())
        slot.actual_g_per_kwh = intensity["actual"].get<std::int64_t>();
      series.slots.push_back(std::move(slot));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("carbon API record malformed: ") + e.what());
  }
  const std::int64_t from = detail::parse_iso_minutes(series.slots[0].from);
  const std::int64_t to = detail::parse_iso_minutes(series.slots[0].to);
  series.slot_duration_minutes = static_cast<int>(to - from);
  series.date = series.slots[0].from.substr(0, 10);
  validate_carbon_series(series);
  return series;
}

struct FetchOptions {
  bool online = false;  // offline is the default; tests never touch the network
  std::filesystem::path cache_dir = "carbon-cache";
  std::string base_url = "https://api.carbonintensity.org.uk";
};

inline std::string http_get_body(const std::string& base_url, const std::string& path) {
  httplib::Client client(base_url);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  client.set_follow_location(true);
  auto res = client.Get(path);
  if (!res)
    throw HttpError(0, "network failure fetching " + base_url + path + ": " +
                           httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw HttpError(res->status,
                    "HTTP " + std::to_string(res->status) + " fetching " + base_url + path);
  return res->body;
}

// Returns the cached fixture for the date when present; otherwise fetches
// /intensity/date/{YYYY-MM-DD}, records it as a CSV fixture (temp file +
// atomic rename, so concurrent fetches cannot corrupt the cache) and returns
// the parsed series.
inline CarbonSeries fetch_carbon_day(const std::string& date, const FetchOptions& options = {}) {
  if (date.size() != 10 || date[4] != '-' || date[7] != '-')
    throw ValidationError("date must be YYYY-MM-DD, got '" + date + "'");
  const std::filesystem::path cached = options.cache_dir / (date + ".csv");
  if (std::filesystem::exists(cached)) return load_carbon_csv(cached);
  if (!options.online)
    throw NetworkDisabledError("no cached fixture for " + date +
                               " and network access is disabled (pass --online to fetch)");
  const std::string body = http_get_body(options.base_url, "/intensity/date/" + date);
  CarbonSeries series = parse_carbon_api_json(body);
  save_carbon_csv(cached, series);
  return series;
}

}  // namespace carbonsched
