#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace geoconform {

/// Thrown on unrecoverable input problems (missing file, malformed header).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown on contract violations (calling an operation outside its domain).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Thrown on invalid user-supplied configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Sub-regions
// ---------------------------------------------------------------------------

enum class Subregion : int { North = 0, West = 1, Central = 2, East = 3, Southern = 4 };

inline constexpr int kNumSubregions = 5;

inline constexpr std::array<Subregion, kNumSubregions> kAllSubregions = {
    Subregion::North, Subregion::West, Subregion::Central, Subregion::East,
    Subregion::Southern};

inline std::string_view to_string(Subregion r) {
    switch (r) {
        case Subregion::North: return "north";
        case Subregion::West: return "west";
        case Subregion::Central: return "central";
        case Subregion::East: return "east";
        case Subregion::Southern: return "southern";
    }
    return "?";
}

inline std::optional<Subregion> parse_subregion(std::string_view s) {
    std::string lower(s);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "north") return Subregion::North;
    if (lower == "west") return Subregion::West;
    if (lower == "central") return Subregion::Central;
    if (lower == "east") return Subregion::East;
    if (lower == "southern") return Subregion::Southern;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Timestamps (UTC civil time; downstream consumers only use year and month)
// ---------------------------------------------------------------------------

struct Timestamp {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31
    int hour = 0;
    int minute = 0;
    int second = 0;

    auto operator<=>(const Timestamp&) const = default;
};

namespace detail {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 + static_cast<unsigned>(d) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace detail

/// Parses ISO-8601 "YYYY-MM-DDTHH:MM:SS" with optional "Z" or "+HH:MM"
/// offset; offsets are folded into UTC. Returns nullopt on malformed input.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    auto num = [&](std::size_t pos, std::size_t len, int& out) -> bool {
        if (pos + len > s.size()) return false;
        out = 0;
        for (std::size_t i = 0; i < len; ++i) {
            const char c = s[pos + i];
            if (c < '0' || c > '9') return false;
            out = out * 10 + (c - '0');
        }
        return true;
    };
    Timestamp t;
    if (!num(0, 4, t.year) || s.size() < 10 || s[4] != '-' || s[7] != '-' ||
        !num(5, 2, t.month) || !num(8, 2, t.day))
        return std::nullopt;
    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
        if (!num(pos + 1, 2, t.hour) || s.size() < pos + 9 || s[pos + 3] != ':' ||
            s[pos + 6] != ':' || !num(pos + 4, 2, t.minute) || !num(pos + 7, 2, t.second))
            return std::nullopt;
        pos += 9;
    }
    int offset_min = 0;
    if (pos < s.size()) {
        if (s[pos] == 'Z' && pos + 1 == s.size()) {
            // already UTC
        } else if (s[pos] == '+' || s[pos] == '-') {
            int oh = 0, om = 0;
            if (!num(pos + 1, 2, oh) || s.size() != pos + 6 || s[pos + 3] != ':' ||
                !num(pos + 4, 2, om))
                return std::nullopt;
            offset_min = oh * 60 + om;
            if (s[pos] == '-') offset_min = -offset_min;
        } else {
            return std::nullopt;
        }
    }
    if (t.month < 1 || t.month > 12 || t.day < 1 || t.day > 31 || t.hour > 23 ||
        t.minute > 59 || t.second > 60)
        return std::nullopt;
    if (offset_min != 0) {
        std::int64_t mins = detail::days_from_civil(t.year, t.month, t.day) * 1440 +
                            t.hour * 60 + t.minute - offset_min;
        std::int64_t days = mins / 1440;
        std::int64_t rem = mins % 1440;
        if (rem < 0) {
            rem += 1440;
            --days;
        }
        detail::civil_from_days(days, t.year, t.month, t.day);
        t.hour = static_cast<int>(rem / 60);
        t.minute = static_cast<int>(rem % 60);
    }
    return t;
}

inline std::string format_timestamp(const Timestamp& t) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", t.year, t.month,
                  t.day, t.hour, t.minute, t.second);
    return buf;
}

// ---------------------------------------------------------------------------
// AQI bins
// ---------------------------------------------------------------------------

enum class AqiBin : int {
    Good = 0,
    Moderate = 1,
    Usg = 2,  // unhealthy for sensitive groups
    Unhealthy = 3,
    VeryUnhealthy = 4,
    Hazardous = 5,
};

inline constexpr int kNumAqiBins = 6;

inline std::string_view to_string(AqiBin b) {
    switch (b) {
        case AqiBin::Good: return "good";
        case AqiBin::Moderate: return "moderate";
        case AqiBin::Usg: return "usg";
        case AqiBin::Unhealthy: return "unhealthy";
        case AqiBin::VeryUnhealthy: return "very_unhealthy";
        case AqiBin::Hazardous: return "hazardous";
    }
    return "?";
}

/// Health-based PM2.5 category. Upper-inclusive boundaries:
/// (0,12] (12,35] (35,55] (55,150] (150,250] (250,inf).
inline AqiBin aqi_bin(double pm25) {
    if (!(pm25 > 0.0) || !std::isfinite(pm25))
        throw ContractError("aqi_bin: pm25 must be finite and > 0");
    if (pm25 <= 12.0) return AqiBin::Good;
    if (pm25 <= 35.0) return AqiBin::Moderate;
    if (pm25 <= 55.0) return AqiBin::Usg;
    if (pm25 <= 150.0) return AqiBin::Unhealthy;
    if (pm25 <= 250.0) return AqiBin::VeryUnhealthy;
    return AqiBin::Hazardous;
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// Predictor columns, in CSV/feature order.
inline constexpr std::array<std::string_view, 10> kPredictorNames = {
    "sat_aot",     "sat_no2",  "sat_pblh",      "temperature", "humidity",
    "pressure",    "wind_speed", "precipitation", "clouds",    "population_density"};

inline constexpr int kNumPredictors = 10;

inline int predictor_index(std::string_view name) {
    for (int i = 0; i < kNumPredictors; ++i)
        if (kPredictorNames[static_cast<std::size_t>(i)] == name) return i;
    return -1;
}

/// One audited ground-truth record.
struct Observation {
    std::string location_id;
    std::string country;
    Subregion subregion = Subregion::North;
    double latitude = 0.0;
    double longitude = 0.0;
    Timestamp timestamp;
    double pm25 = 0.0;
    std::array<double, kNumPredictors> predictors{};

    double predictor(std::string_view name) const {
        const int i = predictor_index(name);
        if (i < 0) throw ContractError("unknown predictor: " + std::string(name));
        return predictors[static_cast<std::size_t>(i)];
    }

    bool operator==(const Observation&) const = default;
};

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

enum class RejectReason : int { MissingField = 0, OutOfRange = 1, Unparseable = 2 };

inline std::string_view to_string(RejectReason r) {
    switch (r) {
        case RejectReason::MissingField: return "missing_field";
        case RejectReason::OutOfRange: return "out_of_range";
        case RejectReason::Unparseable: return "unparseable";
    }
    return "?";
}

/// Candidate record as parsed from one CSV row; every field may be absent.
struct RawRecord {
    std::optional<std::string> location_id;
    std::optional<std::string> country;
    std::optional<Subregion> subregion;
    std::optional<double> latitude;
    std::optional<double> longitude;
    std::optional<Timestamp> timestamp;
    std::optional<double> pm25;
    std::array<std::optional<double>, kNumPredictors> predictors;
};

struct AuditResult {
    std::optional<Observation> accepted;
    std::optional<RejectReason> rejected;

    bool ok() const { return accepted.has_value(); }
};

/// Checks an already-built Observation against the audit invariants.
/// Returns the rejection reason, or nullopt when the record is clean.
inline std::optional<RejectReason> audit_check(const Observation& obs) {
    if (obs.location_id.empty()) return RejectReason::MissingField;
    if (!std::isfinite(obs.pm25)) return RejectReason::MissingField;
    if (obs.pm25 <= 0.0 || obs.pm25 >= 1000.0) return RejectReason::OutOfRange;
    if (!std::isfinite(obs.latitude) || !std::isfinite(obs.longitude))
        return RejectReason::MissingField;
    if (obs.latitude < -90.0 || obs.latitude > 90.0 || obs.longitude < -180.0 ||
        obs.longitude > 180.0)
        return RejectReason::OutOfRange;
    for (double v : obs.predictors)
        if (!std::isfinite(v)) return RejectReason::MissingField;
    return std::nullopt;
}

/// Audits one candidate record. Rejection is a value, never a failure:
/// missing or non-finite critical fields reject as MissingField, pm25 or
/// coordinates outside their physical ranges reject as OutOfRange.
/// The pm25 bound is the open interval (0, 1000).
inline AuditResult audit_record(const RawRecord& raw) {
    auto reject = [](RejectReason r) { return AuditResult{std::nullopt, r}; };

    if (!raw.location_id || raw.location_id->empty() || !raw.subregion ||
        !raw.latitude || !raw.longitude || !raw.timestamp || !raw.pm25)
        return reject(RejectReason::MissingField);
    for (const auto& p : raw.predictors)
        if (!p) return reject(RejectReason::MissingField);

    Observation obs;
    obs.location_id = *raw.location_id;
    obs.country = raw.country.value_or("");
    obs.subregion = *raw.subregion;
    obs.latitude = *raw.latitude;
    obs.longitude = *raw.longitude;
    obs.timestamp = *raw.timestamp;
    obs.pm25 = *raw.pm25;
    for (int i = 0; i < kNumPredictors; ++i)
        obs.predictors[static_cast<std::size_t>(i)] = *raw.predictors[static_cast<std::size_t>(i)];

    if (auto r = audit_check(obs)) return reject(*r);
    return AuditResult{std::move(obs), std::nullopt};
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// Ordered list of audited observations with location and sub-region
/// indices. Immutable after construction; safe to share across threads.
class Dataset {
public:
    Dataset() = default;

    explicit Dataset(std::vector<Observation> records) : records_(std::move(records)) {
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const Observation& o = records_[i];
            if (audit_check(o))
                throw ContractError("Dataset: record " + std::to_string(i) +
                                    " does not pass audit");
            by_location_[o.location_id].push_back(i);
            by_region_[static_cast<std::size_t>(o.subregion)].push_back(i);
        }
    }

    const std::vector<Observation>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const Observation& operator[](std::size_t i) const { return records_[i]; }

    const std::map<std::string, std::vector<std::size_t>>& by_location() const {
        return by_location_;
    }

    const std::vector<std::size_t>& rows_of_region(Subregion r) const {
        return by_region_[static_cast<std::size_t>(r)];
    }

    std::size_t num_locations() const { return by_location_.size(); }

    bool operator==(const Dataset& other) const { return records_ == other.records_; }

private:
    std::vector<Observation> records_;
    std::map<std::string, std::vector<std::size_t>> by_location_;
    std::array<std::vector<std::size_t>, kNumSubregions> by_region_;
};

// ---------------------------------------------------------------------------
// CSV ingestion / serialisation
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "location_id,country,subregion,latitude,longitude,timestamp,pm25,"
    "sat_aot,sat_no2,sat_pblh,temperature,humidity,pressure,wind_speed,"
    "precipitation,clouds,population_density";

struct AuditSummary {
    std::size_t accepted = 0;
    std::size_t missing_field = 0;
    std::size_t out_of_range = 0;
    std::size_t unparseable = 0;

    std::size_t rejected() const { return missing_field + out_of_range + unparseable; }

    void count(RejectReason r) {
        switch (r) {
            case RejectReason::MissingField: ++missing_field; break;
            case RejectReason::OutOfRange: ++out_of_range; break;
            case RejectReason::Unparseable: ++unparseable; break;
        }
    }
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Empty cell -> nullopt. A cell that fails to parse or parses to a
// non-finite value poisons the row as Unparseable.
inline std::optional<double> parse_cell(std::string_view cell, bool& unparseable) {
    if (cell.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        unparseable = true;
        return std::nullopt;
    }
    return v;
}

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace detail

/// Loads and audits a dataset. Per-row problems never abort the load; they
/// are tallied in the summary. Throws DataError on I/O failure or if the
/// header does not match the documented schema.
inline std::pair<Dataset, AuditSummary> load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw DataError(path + ": header does not match schema");

    std::vector<Observation> records;
    AuditSummary summary;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 17) {
            summary.count(RejectReason::Unparseable);
            continue;
        }
        bool unparseable = false;
        RawRecord raw;
        if (!cells[0].empty()) raw.location_id = std::string(cells[0]);
        if (!cells[1].empty()) raw.country = std::string(cells[1]);
        if (!cells[2].empty()) {
            raw.subregion = parse_subregion(cells[2]);
            if (!raw.subregion) unparseable = true;
        }
        raw.latitude = detail::parse_cell(cells[3], unparseable);
        raw.longitude = detail::parse_cell(cells[4], unparseable);
        if (!cells[5].empty()) {
            raw.timestamp = parse_timestamp(cells[5]);
            if (!raw.timestamp) unparseable = true;
        }
        raw.pm25 = detail::parse_cell(cells[6], unparseable);
        for (int i = 0; i < kNumPredictors; ++i)
            raw.predictors[static_cast<std::size_t>(i)] =
                detail::parse_cell(cells[static_cast<std::size_t>(7 + i)], unparseable);

        if (unparseable) {
            summary.count(RejectReason::Unparseable);
            continue;
        }
        AuditResult res = audit_record(raw);
        if (res.ok()) {
            records.push_back(std::move(*res.accepted));
            ++summary.accepted;
        } else {
            summary.count(*res.rejected);
        }
    }
    return {Dataset(std::move(records)), summary};
}

/// Writes the documented CSV schema. Doubles use shortest round-trip
/// formatting so save/load reproduces the dataset exactly.
inline void save_csv(const Dataset& ds, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const Observation& o : ds.records()) {
        out << o.location_id << ',' << o.country << ',' << to_string(o.subregion) << ','
            << detail::format_double(o.latitude) << ',' << detail::format_double(o.longitude)
            << ',' << format_timestamp(o.timestamp) << ',' << detail::format_double(o.pm25);
        for (double p : o.predictors) out << ',' << detail::format_double(p);
        out << '\n';
    }
}

inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    save_csv(ds, out);
}

inline std::string to_csv_string(const Dataset& ds) {
    std::ostringstream ss;
    save_csv(ds, ss);
    return ss.str();
}

}  // namespace geoconform
