#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anythreat/csv.hpp"
#include "anythreat/datamodel.hpp"

namespace anythreat {

using TimePoint = std::chrono::sys_seconds;

enum class EventKind { logon, device, file, http, email };

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::logon: return "logon";
    case EventKind::device: return "device";
    case EventKind::file: return "file";
    case EventKind::http: return "http";
    case EventKind::email: return "email";
  }
  return "?";
}

/// One activity-log record. attrs carries the kind-specific columns
/// (activity, filename, url, to/cc/bcc, attachment_count).
struct Event {
  EventKind kind = EventKind::logon;
  TimePoint timestamp{};
  std::string user;
  std::string pc;
  std::map<std::string, std::string> attrs;
};

struct InsiderWindow {
  std::string scenario;
  TimePoint start{};
  TimePoint end{};
};

struct GroundTruth {
  std::map<std::string, InsiderWindow> insiders;

  void validate() const {
    for (const auto& [user, w] : insiders) {
      if (w.end < w.start)
        throw std::invalid_argument("ground truth: window for " + user + " is reversed");
    }
  }
};

// ---------------------------------------------------------------------------
// Timestamps: the fixed log format is "MM/DD/YYYY HH:MM:SS".
// ---------------------------------------------------------------------------

inline std::optional<TimePoint> parse_timestamp(const std::string& s) {
  unsigned mo = 0, d = 0, y = 0, h = 0, mi = 0, se = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%2u/%2u/%4u %2u:%2u:%2u%c", &mo, &d, &y, &h, &mi, &se, &tail) != 6)
    return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || se > 59) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                        std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} +
         std::chrono::seconds{se};
}

inline std::string format_timestamp(TimePoint tp) {
  const auto day = std::chrono::floor<std::chrono::days>(tp);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss<std::chrono::seconds> tod{tp - day};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%02u/%02u/%04d %02lld:%02lld:%02lld",
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(ymd.year()), static_cast<long long>(tod.hours().count()),
                static_cast<long long>(tod.minutes().count()),
                static_cast<long long>(tod.seconds().count()));
  return buf;
}

// ---------------------------------------------------------------------------
// Log parsing
// ---------------------------------------------------------------------------

/// Column-name mapping from the canonical schema to what a log deployment
/// actually uses. Canonical columns are: id,date,user,pc plus activity
/// (logon/device), filename (file), url (http) and to,cc,bcc,from,size,
/// attachment_count (email).
struct SchemaMap {
  std::map<std::string, std::string> rename;

  const std::string& column(const std::string& canonical) const {
    const auto it = rename.find(canonical);
    return it == rename.end() ? canonical : it->second;
  }
};

struct ParseResult {
  std::vector<Event> events;  // sorted by timestamp
  std::size_t skipped_rows = 0;
};

namespace ingest_detail {

inline EventKind kind_from_path(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = stem.find('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  if (stem == "logon") return EventKind::logon;
  if (stem == "device") return EventKind::device;
  if (stem == "file") return EventKind::file;
  if (stem == "http") return EventKind::http;
  if (stem == "email") return EventKind::email;
  throw std::runtime_error("unrecognised log file name '" + path +
                           "' (expected logon/device/file/http/email)");
}

inline std::vector<std::string> kind_attr_columns(EventKind kind) {
  switch (kind) {
    case EventKind::logon:
    case EventKind::device: return {"activity"};
    case EventKind::file: return {"filename"};
    case EventKind::http: return {"url"};
    case EventKind::email: return {"to", "cc", "bcc", "from", "size", "attachment_count"};
  }
  return {};
}

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                                const std::string& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw std::runtime_error(path + ": header is missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace ingest_detail

/// Parses CERT-style activity logs. The event kind comes from the file name
/// stem. Malformed rows are skipped and counted; a file whose timestamp
/// column fails to parse on more than 10% of rows aborts the run, since that
/// signals a schema mismatch rather than noise.
inline ParseResult parse_logs(const std::vector<std::string>& paths, const SchemaMap& schema = {}) {
  ParseResult out;
  for (const auto& path : paths) {
    const EventKind kind = ingest_detail::kind_from_path(path);
    const CsvFile csv = read_csv(path);
    if (csv.header.empty()) throw std::runtime_error(path + ": empty file");

    const std::size_t date_col =
        ingest_detail::column_index(csv.header, schema.column("date"), path);
    const std::size_t user_col =
        ingest_detail::column_index(csv.header, schema.column("user"), path);
    const std::size_t pc_col = ingest_detail::column_index(csv.header, schema.column("pc"), path);
    std::vector<std::pair<std::string, std::size_t>> attr_cols;
    for (const auto& canonical : ingest_detail::kind_attr_columns(kind)) {
      attr_cols.emplace_back(canonical,
                             ingest_detail::column_index(csv.header, schema.column(canonical), path));
    }

    std::size_t bad_timestamps = 0;
    for (const auto& row : csv.rows) {
      if (row.size() != csv.header.size()) {
        ++out.skipped_rows;
        continue;
      }
      const auto ts = parse_timestamp(row[date_col]);
      if (!ts) {
        ++bad_timestamps;
        ++out.skipped_rows;
        continue;
      }
      if (row[user_col].empty()) {
        ++out.skipped_rows;
        continue;
      }
      Event e;
      e.kind = kind;
      e.timestamp = *ts;
      e.user = row[user_col];
      e.pc = row[pc_col];
      for (const auto& [canonical, col] : attr_cols) e.attrs[canonical] = row[col];
      out.events.push_back(std::move(e));
    }
    if (!csv.rows.empty() &&
        static_cast<double>(bad_timestamps) > 0.10 * static_cast<double>(csv.rows.size())) {
      throw std::runtime_error(path + ": >10% of rows have unparseable timestamps (" +
                               std::to_string(bad_timestamps) + "/" +
                               std::to_string(csv.rows.size()) + "), schema mismatch?");
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  return out;
}

inline std::map<std::string, std::string> load_roles(const std::string& path) {
  const CsvFile csv = read_csv(path);
  const std::size_t user_col = ingest_detail::column_index(csv.header, "user", path);
  const std::size_t role_col = ingest_detail::column_index(csv.header, "role", path);
  std::map<std::string, std::string> out;
  for (const auto& row : csv.rows) out[row[user_col]] = row[role_col];
  return out;
}

inline GroundTruth load_ground_truth(const std::string& path) {
  const CsvFile csv = read_csv(path);
  const std::size_t user_col = ingest_detail::column_index(csv.header, "user", path);
  const std::size_t scen_col = ingest_detail::column_index(csv.header, "scenario", path);
  const std::size_t start_col = ingest_detail::column_index(csv.header, "start", path);
  const std::size_t end_col = ingest_detail::column_index(csv.header, "end", path);
  GroundTruth out;
  for (const auto& row : csv.rows) {
    const auto start = parse_timestamp(row[start_col]);
    const auto end = parse_timestamp(row[end_col]);
    if (!start || !end)
      throw std::runtime_error(path + ": bad window timestamps for user " + row[user_col]);
    out.insiders[row[user_col]] = InsiderWindow{row[scen_col], *start, *end};
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Feature extraction
// ---------------------------------------------------------------------------

/// Knobs of the behaviour feature set. The five feature groups are fixed;
/// what counts as after-hours, sensitive, or a flagged URL is configuration.
struct FeatureConfig {
  int work_start_hour = 8;
  int work_end_hour = 17;
  std::string org_domain = "corp.com";
  std::vector<std::string> sensitive_extensions = {".zip", ".rar", ".7z",
                                                   ".docx", ".pdf", ".key"};
  std::vector<std::string> job_sites = {"indeed.com", "monster.com", "careerbuilder.com"};
  std::vector<std::string> leak_sites = {"wikileaks.org", "cryptome.org"};
};

inline FeatureSchema behaviour_schema() {
  FeatureSchema s;
  const auto add = [&s](const char* name, FeatureGroup g) {
    s.names.push_back(name);
    s.groups.push_back(g);
  };
  add("n_logon", FeatureGroup::frequency);
  add("n_device_connect", FeatureGroup::frequency);
  add("n_file_copy", FeatureGroup::frequency);
  add("n_http", FeatureGroup::frequency);
  add("n_email", FeatureGroup::frequency);
  add("n_logon_afterhours", FeatureGroup::time);
  add("n_device_afterhours", FeatureGroup::time);
  add("n_http_afterhours", FeatureGroup::time);
  add("any_bcc", FeatureGroup::boolean);
  add("any_external_recipient", FeatureGroup::boolean);
  add("any_sensitive_extension", FeatureGroup::boolean);
  add("n_jobsite_url", FeatureGroup::attribute);
  add("n_leaksite_url", FeatureGroup::attribute);
  add("total_recipients", FeatureGroup::other);
  add("total_attachments", FeatureGroup::other);
  add("distinct_pcs", FeatureGroup::other);
  add("n_file_afterhours", FeatureGroup::other);
  add("n_email_external", FeatureGroup::other);
  return s;
}

namespace ingest_detail {

inline bool after_hours(TimePoint tp, const FeatureConfig& cfg) {
  const auto day = std::chrono::floor<std::chrono::days>(tp);
  const auto hour = std::chrono::duration_cast<std::chrono::hours>(tp - day).count();
  return hour < cfg.work_start_hour || hour >= cfg.work_end_hour;
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool ends_with_any(const std::string& value, const std::vector<std::string>& suffixes) {
  const std::string v = lower(value);
  for (const auto& suffix : suffixes) {
    if (v.size() >= suffix.size() && v.compare(v.size() - suffix.size(), suffix.size(), suffix) == 0)
      return true;
  }
  return false;
}

inline bool contains_any(const std::string& value, const std::vector<std::string>& needles) {
  const std::string v = lower(value);
  for (const auto& needle : needles) {
    if (v.find(needle) != std::string::npos) return true;
  }
  return false;
}

/// Recipient lists are semicolon separated.
inline std::vector<std::string> recipients(const std::string& field) {
  std::vector<std::string> out;
  std::string acc;
  for (const char c : field) {
    if (c == ';') {
      if (!acc.empty()) out.push_back(acc);
      acc.clear();
    } else {
      acc.push_back(c);
    }
  }
  if (!acc.empty()) out.push_back(acc);
  return out;
}

inline bool external_address(const std::string& address, const std::string& org_domain) {
  const auto at = address.find('@');
  if (at == std::string::npos) return false;
  return lower(address.substr(at + 1)) != lower(org_domain);
}

}  // namespace ingest_detail

/// Computes the 18 behaviour features of one (user, session slot) bucket.
/// All inputs must belong to the same user and slot.
inline std::vector<double> extract_features(const std::vector<Event>& events,
                                            const FeatureConfig& cfg = {}) {
  using namespace ingest_detail;
  double n_logon = 0, n_device = 0, n_file = 0, n_http = 0, n_email = 0;
  double n_logon_ah = 0, n_device_ah = 0, n_http_ah = 0, n_file_ah = 0;
  bool any_bcc = false, any_external = false, any_sensitive = false;
  double n_jobsite = 0, n_leaksite = 0;
  double total_recipients = 0, total_attachments = 0, n_email_external = 0;
  std::set<std::string> pcs;

  for (const Event& e : events) {
    if (!e.pc.empty()) pcs.insert(e.pc);
    const bool ah = after_hours(e.timestamp, cfg);
    switch (e.kind) {
      case EventKind::logon: {
        const auto it = e.attrs.find("activity");
        if (it == e.attrs.end() || it->second != "Logoff") {
          ++n_logon;
          if (ah) ++n_logon_ah;
        }
        break;
      }
      case EventKind::device: {
        const auto it = e.attrs.find("activity");
        if (it == e.attrs.end() || it->second != "Disconnect") {
          ++n_device;
          if (ah) ++n_device_ah;
        }
        break;
      }
      case EventKind::file: {
        ++n_file;
        if (ah) ++n_file_ah;
        const auto it = e.attrs.find("filename");
        if (it != e.attrs.end() && ends_with_any(it->second, cfg.sensitive_extensions))
          any_sensitive = true;
        break;
      }
      case EventKind::http: {
        ++n_http;
        if (ah) ++n_http_ah;
        const auto it = e.attrs.find("url");
        if (it != e.attrs.end()) {
          if (contains_any(it->second, cfg.job_sites)) ++n_jobsite;
          if (contains_any(it->second, cfg.leak_sites)) ++n_leaksite;
        }
        break;
      }
      case EventKind::email: {
        ++n_email;
        bool external = false;
        for (const char* field : {"to", "cc", "bcc"}) {
          const auto it = e.attrs.find(field);
          if (it == e.attrs.end()) continue;
          const auto rcpts = recipients(it->second);
          total_recipients += static_cast<double>(rcpts.size());
          for (const auto& r : rcpts) {
            if (external_address(r, cfg.org_domain)) external = true;
          }
        }
        if (const auto it = e.attrs.find("bcc"); it != e.attrs.end() && !it->second.empty())
          any_bcc = true;
        if (external) {
          any_external = true;
          ++n_email_external;
        }
        if (const auto it = e.attrs.find("attachment_count"); it != e.attrs.end()) {
          total_attachments += std::strtod(it->second.c_str(), nullptr);
        }
        break;
      }
    }
  }

  return {n_logon,
          n_device,
          n_file,
          n_http,
          n_email,
          n_logon_ah,
          n_device_ah,
          n_http_ah,
          any_bcc ? 1.0 : 0.0,
          any_external ? 1.0 : 0.0,
          any_sensitive ? 1.0 : 0.0,
          n_jobsite,
          n_leaksite,
          total_recipients,
          total_attachments,
          static_cast<double>(pcs.size()),
          n_file_ah,
          n_email_external};
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

/// Slots tile the observation period in slot_hours chunks, anchored at
/// midnight of the earliest event's day, so every event lands in exactly one
/// slot.
inline std::int64_t slot_index(TimePoint ts, TimePoint epoch, double slot_hours) {
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ts - epoch).count();
  return static_cast<std::int64_t>(
      std::floor(static_cast<double>(secs) / (slot_hours * 3600.0)));
}

/// Buckets a community's events into (user, slot) instances, extracts the
/// behaviour features, labels an instance Anomalous when its user has a
/// ground-truth malicious event inside the slot, and normalizes the result.
/// Only (user, slot) pairs with at least one event produce an instance.
inline CommunityDataset build_dataset(const std::vector<Event>& events,
                                      const std::map<std::string, std::string>& roles,
                                      const std::string& community, const GroundTruth& truth,
                                      double slot_hours = 4.0, const FeatureConfig& cfg = {}) {
  if (events.empty()) throw std::invalid_argument("build_dataset: no events");
  bool role_exists = false;
  for (const auto& [user, role] : roles) {
    if (role == community) {
      role_exists = true;
      break;
    }
  }
  if (!role_exists)
    throw std::runtime_error("build_dataset: no user has role '" + community + "'");

  const TimePoint epoch =
      std::chrono::floor<std::chrono::days>(std::min_element(events.begin(), events.end(),
                                                             [](const Event& a, const Event& b) {
                                                               return a.timestamp < b.timestamp;
                                                             })
                                                ->timestamp);

  std::map<std::pair<std::string, std::int64_t>, std::vector<Event>> buckets;
  for (const Event& e : events) {
    const auto role = roles.find(e.user);
    if (role == roles.end() || role->second != community) continue;
    buckets[{e.user, slot_index(e.timestamp, epoch, slot_hours)}].push_back(e);
  }

  CommunityDataset d;
  d.role = community;
  d.schema = behaviour_schema();
  d.slot_hours = slot_hours;
  for (const auto& [key, bucket] : buckets) {
    Instance inst;
    inst.user = key.first;
    inst.slot = key.second;
    inst.x = extract_features(bucket, cfg);

    if (const auto it = truth.insiders.find(inst.user); it != truth.insiders.end()) {
      for (const Event& e : bucket) {
        if (e.timestamp >= it->second.start && e.timestamp <= it->second.end) {
          inst.label = Label::Anomalous;
          inst.threat_id = inst.user;
          break;
        }
      }
    }
    d.instances.push_back(std::move(inst));
  }
  d.validate();
  return normalize(std::move(d));
}

}  // namespace anythreat
