#pragma once

// Temperature / CO2 CSV ingestion, per-city bucketing, gap repair and monthly resampling.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "climcast/error.hpp"

namespace climcast {

/// Calendar month, stored as a linear month count so that index arithmetic is trivial.
class YearMonth {
public:
    constexpr YearMonth() = default;
    constexpr YearMonth(int year, int month) : linear_(year * 12 + (month - 1)) {}

    [[nodiscard]] static constexpr YearMonth from_linear(int linear) {
        YearMonth ym;
        ym.linear_ = linear;
        return ym;
    }

    [[nodiscard]] constexpr int year() const { return linear_ >= 0 ? linear_ / 12 : (linear_ - 11) / 12; }
    [[nodiscard]] constexpr int month() const { return linear_ - year() * 12 + 1; }
    [[nodiscard]] constexpr int linear() const { return linear_; }

    [[nodiscard]] constexpr YearMonth operator+(int months) const { return from_linear(linear_ + months); }
    [[nodiscard]] constexpr int operator-(YearMonth other) const { return linear_ - other.linear_; }
    constexpr auto operator<=>(const YearMonth&) const = default;

    /// "YYYY-MM"
    [[nodiscard]] std::string to_string() const {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04d-%02d", year(), month());
        return buf;
    }

    /// Parses "YYYY-MM" (a trailing "-DD" is tolerated and ignored).
    [[nodiscard]] static std::optional<YearMonth> parse(std::string_view text);

private:
    int linear_ = 0;
};

enum class Frequency { Monthly };

/// Gap-free monthly series: values[i] belongs to start + i months.
class TimeSeries {
public:
    TimeSeries(YearMonth start, std::vector<double> values, std::string label = {})
        : start_(start), values_(std::move(values)), label_(std::move(label)) {
        if (values_.empty()) throw std::invalid_argument("TimeSeries: empty value list");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw std::invalid_argument("TimeSeries: non-finite value at index " + std::to_string(i));
            }
        }
    }

    [[nodiscard]] YearMonth start() const { return start_; }
    [[nodiscard]] YearMonth end() const { return start_ + (static_cast<int>(values_.size()) - 1); }
    [[nodiscard]] Frequency frequency() const { return Frequency::Monthly; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] const std::string& label() const { return label_; }
    [[nodiscard]] YearMonth month_at(std::size_t i) const { return start_ + static_cast<int>(i); }

    /// Contiguous sub-range [first, first + count).
    [[nodiscard]] TimeSeries slice(std::size_t first, std::size_t count) const {
        if (first + count > values_.size() || count == 0) throw std::out_of_range("TimeSeries::slice");
        return {month_at(first), {values_.begin() + first, values_.begin() + first + count}, label_};
    }

private:
    YearMonth start_;
    std::vector<double> values_;
    std::string label_;
};

struct RawRecord {
    std::chrono::year_month_day date;
    std::optional<double> avg_temperature;
    std::optional<double> temperature_uncertainty;
    std::string city;
    std::string country;
    std::string latitude;
    std::string longitude;
};

struct CityKey {
    std::string city;
    std::string country;

    auto operator<=>(const CityKey&) const = default;
};

struct Co2Record {
    std::string country;
    int year = 0;
    double emissions = 0.0;
};

/// Header names of the three CO2 columns that matter; other columns are ignored.
struct Co2Columns {
    std::string country = "country";
    std::string year = "year";
    std::string emissions = "co2";
};

inline constexpr double kMinPlausibleTemperature = -95.0;
inline constexpr double kMaxPlausibleTemperature = 60.0;
inline constexpr std::size_t kMinUsableMonths = 24;

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (ch != '\r') {
            current.push_back(ch);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::optional<int> parse_int(std::string_view s) {
    s = trim(s);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::optional<std::chrono::year_month_day> parse_date(std::string_view s) {
    s = trim(s);
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    const auto y = parse_int(s.substr(0, 4));
    const auto m = parse_int(s.substr(5, 2));
    const auto d = parse_int(s.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                          std::chrono::day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
}

inline bool getline_stripped(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

inline void strip_bom(std::string& line) {
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
    }
}

inline YearMonth to_year_month(const std::chrono::year_month_day& d) {
    return {static_cast<int>(d.year()), static_cast<int>(static_cast<unsigned>(d.month()))};
}

/// Months since year 0 plus the fraction of the month elapsed, so first-of-month rows sit on integers.
inline double month_position(const std::chrono::year_month_day& d) {
    const auto last = std::chrono::year_month_day_last{d.year(), std::chrono::month_day_last{d.month()}}.day();
    const double frac = static_cast<double>(static_cast<unsigned>(d.day()) - 1) / static_cast<unsigned>(last);
    return static_cast<double>(to_year_month(d).linear()) + frac;
}

}  // namespace detail

inline std::optional<YearMonth> YearMonth::parse(std::string_view text) {
    text = detail::trim(text);
    if (text.size() < 7 || text[4] != '-') return std::nullopt;
    const auto y = detail::parse_int(text.substr(0, 4));
    const auto m = detail::parse_int(text.substr(5, 2));
    if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
    return YearMonth{*y, *m};
}

inline constexpr std::string_view kTemperatureColumns[] = {
    "dt", "AverageTemperature", "AverageTemperatureUncertainty", "City", "Country", "Latitude", "Longitude"};

/**
 * Parses the major-city temperature file.
 *
 * The header must list the seven documented columns in their documented order. Empty
 * temperature cells become nullopt. Rows are read line by line, so the stream is never
 * held in memory in full.
 *
 * Throws FormatError for a malformed header and RowError (with 1-based line number) for
 * bad rows. Every row is validated; when `keep` is given, only rows it accepts are stored.
 */
inline std::vector<RawRecord> parse_temperature_csv(std::istream& in,
                                                    const std::function<bool(const CityKey&)>& keep = {}) {
    std::string line;
    if (!detail::getline_stripped(in, line)) throw FormatError("temperature CSV: missing header row");
    detail::strip_bom(line);
    const auto header = detail::split_csv_line(line);
    for (std::size_t i = 0; i < std::size(kTemperatureColumns); ++i) {
        const auto& expected = kTemperatureColumns[i];
        if (i >= header.size() || detail::trim(header[i]) != expected) {
            throw FormatError("temperature CSV: missing column '" + std::string(expected) + "' at position " +
                              std::to_string(i + 1));
        }
    }

    std::vector<RawRecord> out;
    std::size_t line_no = 1;
    while (detail::getline_stripped(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != std::size(kTemperatureColumns)) {
            throw RowError(line_no, "expected 7 fields, found " + std::to_string(fields.size()));
        }
        RawRecord rec;
        const auto date = detail::parse_date(fields[0]);
        if (!date) throw RowError(line_no, "unparseable date '" + fields[0] + "'");
        rec.date = *date;

        auto parse_optional = [&](const std::string& cell, const char* name) -> std::optional<double> {
            if (detail::trim(cell).empty()) return std::nullopt;
            const auto v = detail::parse_double(cell);
            if (!v || !std::isfinite(*v)) throw RowError(line_no, std::string("unparseable ") + name);
            return v;
        };
        rec.avg_temperature = parse_optional(fields[1], "AverageTemperature");
        rec.temperature_uncertainty = parse_optional(fields[2], "AverageTemperatureUncertainty");
        if (rec.avg_temperature &&
            (*rec.avg_temperature < kMinPlausibleTemperature || *rec.avg_temperature > kMaxPlausibleTemperature)) {
            throw RowError(line_no, "temperature outside plausible range");
        }
        rec.city = std::string(detail::trim(fields[3]));
        rec.country = std::string(detail::trim(fields[4]));
        if (rec.city.empty() || rec.country.empty()) throw RowError(line_no, "empty city or country");
        if (keep && !keep(CityKey{rec.city, rec.country})) continue;
        rec.latitude = std::move(fields[5]);
        rec.longitude = std::move(fields[6]);
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<RawRecord> parse_temperature_csv(std::string_view bytes,
                                                    const std::function<bool(const CityKey&)>& keep = {}) {
    std::istringstream in{std::string(bytes)};
    return parse_temperature_csv(in, keep);
}

/// Buckets records by (city, country); each bucket is stably sorted by date.
inline std::map<CityKey, std::vector<RawRecord>> split_by_city(std::vector<RawRecord> records) {
    std::map<CityKey, std::vector<RawRecord>> buckets;
    for (auto& rec : records) {
        CityKey key{std::string(detail::trim(rec.city)), std::string(detail::trim(rec.country))};
        buckets[std::move(key)].push_back(std::move(rec));
    }
    for (auto& [key, bucket] : buckets) {
        std::stable_sort(bucket.begin(), bucket.end(),
                         [](const RawRecord& a, const RawRecord& b) { return a.date < b.date; });
    }
    return buckets;
}

/**
 * Turns one city's daily or monthly records into a gap-free monthly mean series.
 *
 * Leading and trailing null runs are dropped. Interior nulls are linearly interpolated in
 * fractional-month position between the nearest observed neighbours, observations are
 * averaged per calendar month, and months with no rows at all are interpolated the same way.
 *
 * Throws InsufficientDataError when the result spans fewer than `min_months` months.
 */
inline TimeSeries repair_and_resample(std::span<const RawRecord> records, std::size_t min_months = kMinUsableMonths) {
    std::vector<const RawRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->date < b->date; });

    std::size_t first = sorted.size();
    std::size_t last = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i]->avg_temperature) {
            first = std::min(first, i);
            last = i;
        }
    }
    const std::string label = records.empty() ? std::string{} : records.front().city;
    if (first == sorted.size()) throw InsufficientDataError("no non-null temperature observations");

    // Interior nulls: linear in month position between bracketing observations.
    std::vector<double> filled(last - first + 1);
    std::size_t prev = first;
    for (std::size_t i = first; i <= last; ++i) {
        if (sorted[i]->avg_temperature) {
            filled[i - first] = *sorted[i]->avg_temperature;
            prev = i;
            continue;
        }
        std::size_t next = i + 1;
        while (!sorted[next]->avg_temperature) ++next;
        const double t0 = detail::month_position(sorted[prev]->date);
        const double t1 = detail::month_position(sorted[next]->date);
        const double v0 = *sorted[prev]->avg_temperature;
        const double v1 = *sorted[next]->avg_temperature;
        const double t = detail::month_position(sorted[i]->date);
        filled[i - first] = t1 > t0 ? v0 + (v1 - v0) * (t - t0) / (t1 - t0) : v0;
    }

    // Monthly means.
    const YearMonth start = detail::to_year_month(sorted[first]->date);
    const YearMonth stop = detail::to_year_month(sorted[last]->date);
    const auto n_months = static_cast<std::size_t>(stop - start + 1);
    std::vector<double> sums(n_months, 0.0);
    std::vector<std::size_t> counts(n_months, 0);
    for (std::size_t i = first; i <= last; ++i) {
        const auto m = static_cast<std::size_t>(detail::to_year_month(sorted[i]->date) - start);
        sums[m] += filled[i - first];
        ++counts[m];
    }
    std::vector<double> monthly(n_months);
    std::size_t prev_month = 0;
    for (std::size_t m = 0; m < n_months; ++m) {
        if (counts[m] > 0) {
            monthly[m] = sums[m] / static_cast<double>(counts[m]);
            prev_month = m;
            continue;
        }
        std::size_t next = m + 1;
        while (counts[next] == 0) ++next;
        const double v0 = sums[prev_month] / static_cast<double>(counts[prev_month]);
        const double v1 = sums[next] / static_cast<double>(counts[next]);
        monthly[m] = v0 + (v1 - v0) * static_cast<double>(m - prev_month) / static_cast<double>(next - prev_month);
    }

    if (monthly.size() < min_months) {
        throw InsufficientDataError("series spans " + std::to_string(monthly.size()) + " months, need at least " +
                                    std::to_string(min_months));
    }
    return {start, std::move(monthly), label};
}

/**
 * Parses an annual CO2 table. Header names come from `columns`; extra columns are ignored.
 * Rows whose emissions cell is empty are skipped (the public CO2 tables leave early years
 * blank). Negative emissions, bad years and duplicate (country, year) keys are errors.
 */
inline std::vector<Co2Record> parse_co2_csv(std::istream& in, const Co2Columns& columns = {}) {
    std::string line;
    if (!detail::getline_stripped(in, line)) throw FormatError("CO2 CSV: missing header row");
    detail::strip_bom(line);
    const auto header = detail::split_csv_line(line);
    auto locate = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (detail::trim(header[i]) == name) return i;
        }
        throw FormatError("CO2 CSV: missing column '" + name + "'");
    };
    const std::size_t c_country = locate(columns.country);
    const std::size_t c_year = locate(columns.year);
    const std::size_t c_emis = locate(columns.emissions);
    const std::size_t needed = std::max({c_country, c_year, c_emis}) + 1;

    std::vector<Co2Record> out;
    std::map<std::pair<std::string, int>, std::size_t> seen;
    std::size_t line_no = 1;
    while (detail::getline_stripped(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < needed) throw RowError(line_no, "too few fields");
        const auto year = detail::parse_int(fields[c_year]);
        if (!year) throw RowError(line_no, "unparseable year '" + fields[c_year] + "'");
        if (detail::trim(fields[c_emis]).empty()) continue;
        const auto emissions = detail::parse_double(fields[c_emis]);
        if (!emissions || !std::isfinite(*emissions)) throw RowError(line_no, "unparseable emissions value");
        if (*emissions < 0.0) {
            throw ValidationError("line " + std::to_string(line_no) + ": negative emissions");
        }
        std::string country(detail::trim(fields[c_country]));
        auto [it, inserted] = seen.emplace(std::make_pair(country, *year), line_no);
        if (!inserted) {
            throw DuplicateKeyError("duplicate (country, year) = (" + country + ", " + std::to_string(*year) +
                                    ") on lines " + std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        out.push_back({std::move(country), *year, *emissions});
    }
    return out;
}

inline std::vector<Co2Record> parse_co2_csv(std::string_view bytes, const Co2Columns& columns = {}) {
    std::istringstream in{std::string(bytes)};
    return parse_co2_csv(in, columns);
}

/**
 * Broadcasts annual emissions for `country` onto the months of `temps` as a step function.
 * Years missing inside the covered range carry the most recent earlier year; months before
 * the first covered year take the first year's value, months after the last take the last.
 */
inline TimeSeries align_exogenous(const TimeSeries& temps, std::span<const Co2Record> co2, std::string_view country) {
    const auto wanted = detail::trim(country);
    std::map<int, double> by_year;
    for (const auto& rec : co2) {
        if (detail::trim(rec.country) == wanted) by_year[rec.year] = rec.emissions;
    }
    if (by_year.empty()) {
        throw AlignmentError("no CO2 records for country '" + std::string(wanted) + "'");
    }
    std::vector<double> values(temps.size());
    for (std::size_t i = 0; i < temps.size(); ++i) {
        const int year = temps.month_at(i).year();
        auto it = by_year.upper_bound(year);
        values[i] = it == by_year.begin() ? it->second : std::prev(it)->second;
    }
    return {temps.start(), std::move(values), "co2:" + std::string(wanted)};
}

}  // namespace climcast
