#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "anythreat/csv.hpp"
#include "anythreat/ingest.hpp"
#include "anythreat/rng.hpp"

namespace anythreat {

struct RoleSpec {
  std::string name;
  double proportion = 1.0;
};

/// Generator knobs. The defaults produce one community of 80 users with 12
/// planted insiders over 60 days, which lands the class imbalance in the
/// 0.02..0.15 band once ingested.
struct SynthConfig {
  std::size_t n_users = 80;
  std::size_t n_insiders = 12;
  std::vector<RoleSpec> roles = {{"itadmin", 1.0}};
  std::size_t days = 60;
  std::vector<std::string> scenarios = {"s1", "s2", "s3", "s4"};
  std::uint64_t seed = 42;
  /// Per-activity mean event counts (or per-event probabilities) per user per
  /// workday. The *_overlap rates give normal users occasional insider-like
  /// behaviour, so the scenario features separate imperfectly.
  std::map<std::string, double> noise = {
      {"logon_extra", 0.3},      {"device", 0.4},
      {"file", 1.2},             {"http", 6.0},
      {"email", 2.5},            {"external_recipient", 0.06},
      {"bcc", 0.01},             {"afterhours", 0.03},
      {"jobsite_overlap", 0.08}, {"sensitive_overlap", 0.06},
      {"external_bcc_overlap", 0.004},
  };
  /// First day of the observation period (a Monday).
  TimePoint start = std::chrono::sys_days{std::chrono::year{2011} / 1 / 3};

  double rate(const std::string& key) const {
    const auto it = noise.find(key);
    if (it == noise.end()) throw std::invalid_argument("synth: unknown noise rate '" + key + "'");
    return it->second;
  }

  void validate() const {
    if (n_users == 0) throw std::invalid_argument("synth: n_users must be positive");
    if (n_insiders >= n_users)
      throw std::invalid_argument("synth: n_insiders must be below n_users");
    if (roles.empty()) throw std::invalid_argument("synth: at least one role required");
    double total = 0.0;
    for (const auto& r : roles) total += r.proportion;
    if (std::abs(total - 1.0) > 1e-9)
      throw std::invalid_argument("synth: role proportions must sum to 1");
    if (days < 15) throw std::invalid_argument("synth: needs at least 15 days");
    for (const auto& s : scenarios) {
      if (s != "s1" && s != "s2" && s != "s3" && s != "s4")
        throw std::invalid_argument("synth: unknown scenario tag '" + s + "'");
    }
    if (n_insiders > 0 && scenarios.empty())
      throw std::invalid_argument("synth: insiders need at least one scenario");
  }
};

namespace synth_detail {

inline std::string user_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "U%04zu", i + 1);
  return buf;
}

inline std::string pc_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "PC-%04zu", i + 1);
  return buf;
}

inline bool weekend(TimePoint day_start) {
  const std::chrono::weekday wd{std::chrono::floor<std::chrono::days>(day_start)};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

inline TimePoint at(TimePoint day_start, int hour, int minute, int second) {
  return day_start + std::chrono::hours{hour} + std::chrono::minutes{minute} +
         std::chrono::seconds{second};
}

/// A clock time inside [from_hour, to_hour), minute/second uniform.
template <class R>
TimePoint clock_in(R& rng, TimePoint day_start, int from_hour, int to_hour) {
  const int hour = from_hour + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                                   std::max(1, to_hour - from_hour))));
  return at(day_start, hour, static_cast<int>(rng.below(60)), static_cast<int>(rng.below(60)));
}

struct EventSink {
  std::vector<Event> logon, device, file, http, email;

  std::vector<Event>& of(EventKind kind) {
    switch (kind) {
      case EventKind::logon: return logon;
      case EventKind::device: return device;
      case EventKind::file: return file;
      case EventKind::http: return http;
      case EventKind::email: return email;
    }
    return logon;
  }
};

inline void push(EventSink& sink, EventKind kind, TimePoint ts, const std::string& user,
                 const std::string& pc, std::map<std::string, std::string> attrs = {}) {
  Event e;
  e.kind = kind;
  e.timestamp = ts;
  e.user = user;
  e.pc = pc;
  e.attrs = std::move(attrs);
  sink.of(kind).push_back(std::move(e));
}

inline std::string internal_address(std::size_t user_index) {
  return user_id(user_index) + "@corp.com";
}

/// Ordinary workday behaviour. Each activity type draws from its own stream.
struct NormalDay {
  const SynthConfig& cfg;
  EventSink& sink;

  void emit(std::size_t u, TimePoint day, Rng& rng_logon, Rng& rng_device, Rng& rng_file,
            Rng& rng_http, Rng& rng_email) {
    const std::string user = user_id(u);
    const std::string pc = pc_id(u);

    push(sink, EventKind::logon, clock_in(rng_logon, day, 8, 10), user, pc,
         {{"activity", "Logon"}});
    const auto extra = rng_logon.poisson(cfg.rate("logon_extra"));
    for (std::uint64_t i = 0; i < extra; ++i) {
      push(sink, EventKind::logon, clock_in(rng_logon, day, 12, 15), user, pc,
           {{"activity", "Logon"}});
    }
    push(sink, EventKind::logon, clock_in(rng_logon, day, 16, 18), user, pc,
         {{"activity", "Logoff"}});

    const auto devices = rng_device.poisson(cfg.rate("device"));
    for (std::uint64_t i = 0; i < devices; ++i) {
      const TimePoint t = clock_in(rng_device, day, 9, 16);
      push(sink, EventKind::device, t, user, pc, {{"activity", "Connect"}});
      push(sink, EventKind::device, t + std::chrono::minutes{5 + rng_device.below(40)}, user, pc,
           {{"activity", "Disconnect"}});
    }

    const auto files = rng_file.poisson(cfg.rate("file"));
    for (std::uint64_t i = 0; i < files; ++i) {
      const bool afterhours = draw_bernoulli(rng_file, cfg.rate("afterhours"));
      const bool sensitive = draw_bernoulli(rng_file, cfg.rate("sensitive_overlap"));
      char name[48];
      std::snprintf(name, sizeof(name), "doc%05llu%s",
                    static_cast<unsigned long long>(rng_file.below(100000)),
                    sensitive ? ".pdf" : ".txt");
      push(sink, EventKind::file,
           afterhours ? clock_in(rng_file, day, 18, 22) : clock_in(rng_file, day, 9, 17), user,
           pc, {{"filename", name}});
    }

    const auto visits = rng_http.poisson(cfg.rate("http"));
    static const char* kBenignSites[] = {"news.example.com", "wiki.example.org",
                                         "weather.example.net", "intranet.corp.com"};
    for (std::uint64_t i = 0; i < visits; ++i) {
      const bool afterhours = draw_bernoulli(rng_http, cfg.rate("afterhours"));
      std::string url;
      if (draw_bernoulli(rng_http, cfg.rate("jobsite_overlap"))) {
        url = "https://indeed.com/jobs?q=" + std::to_string(rng_http.below(300));
      } else {
        url = std::string("http://") + kBenignSites[rng_http.below(4)] + "/page" +
              std::to_string(rng_http.below(500));
      }
      push(sink, EventKind::http,
           afterhours ? clock_in(rng_http, day, 18, 23) : clock_in(rng_http, day, 8, 17), user,
           pc, {{"url", url}});
    }

    const auto mails = rng_email.poisson(cfg.rate("email"));
    for (std::uint64_t i = 0; i < mails; ++i) {
      const std::size_t rcpt = rng_email.below(cfg.n_users);
      std::string to = internal_address(rcpt);
      if (draw_bernoulli(rng_email, cfg.rate("external_recipient"))) {
        to = "contact" + std::to_string(rng_email.below(50)) + "@partner.example.com";
      }
      std::string bcc;
      if (draw_bernoulli(rng_email, cfg.rate("external_bcc_overlap"))) {
        bcc = "personal" + std::to_string(rng_email.below(40)) + "@mail.example.net";
      } else if (draw_bernoulli(rng_email, cfg.rate("bcc"))) {
        bcc = internal_address(rng_email.below(cfg.n_users));
      }
      std::map<std::string, std::string> attrs = {
          {"to", to},
          {"cc", rng_email.below(3) == 0 ? internal_address(rng_email.below(cfg.n_users)) : ""},
          {"bcc", bcc},
          {"from", internal_address(u)},
          {"size", std::to_string(500 + rng_email.below(20000))},
          {"attachment_count", std::to_string(rng_email.poisson(0.3))},
      };
      push(sink, EventKind::email, clock_in(rng_email, day, 8, 17), user, pc, std::move(attrs));
    }
  }
};

/// Injects one insider's scenario events and returns the days touched.
/// Every scenario writes to at least four distinct days inside the window.
struct ScenarioInjector {
  const SynthConfig& cfg;
  EventSink& sink;

  std::set<std::size_t> inject(const std::string& scenario, std::size_t u, Rng& rng,
                               const std::vector<std::size_t>& candidate_days) {
    const std::string user = user_id(u);
    const std::string pc = pc_id(u);

    // pick 4..6 distinct active days from the window
    std::vector<std::size_t> days = candidate_days;
    rng.shuffle(days);
    const std::size_t want = std::min<std::size_t>(days.size(), 4 + rng.below(3));
    days.resize(want);
    std::sort(days.begin(), days.end());

    std::set<std::size_t> touched;
    for (const std::size_t d : days) {
      const TimePoint day = cfg.start + std::chrono::days{static_cast<long>(d)};
      touched.insert(d);
      if (scenario == "s1") {
        // after-hours access plus leak-site traffic and device use
        push(sink, EventKind::logon, clock_in(rng, day, 21, 23), user, pc,
             {{"activity", "Logon"}});
        if (draw_bernoulli(rng, 0.7)) {
          push(sink, EventKind::device, clock_in(rng, day, 21, 23), user, pc,
               {{"activity", "Connect"}});
        }
        const std::uint64_t visits = 1 + rng.below(3);
        for (std::uint64_t i = 0; i < visits; ++i) {
          push(sink, EventKind::http, clock_in(rng, day, 21, 24), user, pc,
               {{"url", "https://wikileaks.org/submit" + std::to_string(rng.below(40))}});
        }
      } else if (scenario == "s2") {
        // job hunting plus copying to a device
        const std::uint64_t visits = 1 + rng.below(6);
        for (std::uint64_t i = 0; i < visits; ++i) {
          push(sink, EventKind::http, clock_in(rng, day, 9, 17), user, pc,
               {{"url", "https://indeed.com/viewjob?id=" + std::to_string(rng.below(9000))}});
        }
        push(sink, EventKind::device, clock_in(rng, day, 9, 16), user, pc,
             {{"activity", "Connect"}});
        const std::uint64_t copies = 1 + rng.below(7);
        for (std::uint64_t i = 0; i < copies; ++i) {
          push(sink, EventKind::file, clock_in(rng, day, 9, 17), user, pc,
               {{"filename", "export" + std::to_string(rng.below(2000)) + ".zip"}});
        }
      } else if (scenario == "s3") {
        // privilege abuse: logons across several machines
        const std::uint64_t machines = 2 + rng.below(4);
        for (std::uint64_t i = 0; i < machines; ++i) {
          const std::string other_pc = pc_id(rng.below(cfg.n_users));
          const bool late = draw_bernoulli(rng, 0.3);
          push(sink, EventKind::logon,
               late ? clock_in(rng, day, 19, 23) : clock_in(rng, day, 9, 17), user, other_pc,
               {{"activity", "Logon"}});
        }
      } else {  // s4: exfiltration over bcc with attachments
        const std::uint64_t mails = 1 + rng.below(2);
        for (std::uint64_t i = 0; i < mails; ++i) {
          std::map<std::string, std::string> attrs = {
              {"to", internal_address(rng.below(cfg.n_users))},
              {"cc", ""},
              {"bcc", "dropbox" + std::to_string(rng.below(30)) + "@exfil.example.com"},
              {"from", internal_address(u)},
              {"size", std::to_string(40000 + rng.below(900000))},
              {"attachment_count", std::to_string(1 + rng.below(3))},
          };
          push(sink, EventKind::email, clock_in(rng, day, 9, 17), user, pc, std::move(attrs));
        }
      }
    }
    return touched;
  }
};

inline void write_log(const std::filesystem::path& path, char id_prefix, std::vector<Event> events,
                      const std::vector<std::string>& header,
                      const std::vector<std::string>& attr_columns) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  std::ofstream out(path);
  if (!out) throw std::runtime_error("synth: cannot write " + path.string());
  write_csv_row(out, header);
  std::size_t counter = 0;
  for (const Event& e : events) {
    char id[32];
    std::snprintf(id, sizeof(id), "%c%07zu", id_prefix, ++counter);
    std::vector<std::string> row = {id, format_timestamp(e.timestamp), e.user, e.pc};
    for (const auto& col : attr_columns) {
      const auto it = e.attrs.find(col);
      row.push_back(it == e.attrs.end() ? "" : it->second);
    }
    write_csv_row(out, row);
  }
}

}  // namespace synth_detail

/// Generates the activity-log corpus with planted insider scenarios and
/// returns the ground truth. Writes logon/device/file/http/email.csv plus
/// roles.csv, insiders.csv and manifest.json into out_dir. Identical
/// configurations produce byte-identical files.
inline GroundTruth generate(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  // role assignment by proportion over the deterministic user order
  std::vector<std::string> role_of(cfg.n_users);
  {
    std::size_t assigned = 0;
    double acc = 0.0;
    for (std::size_t r = 0; r < cfg.roles.size(); ++r) {
      acc += cfg.roles[r].proportion;
      std::size_t until = r + 1 == cfg.roles.size()
                              ? cfg.n_users
                              : static_cast<std::size_t>(acc * static_cast<double>(cfg.n_users));
      until = std::min(until, cfg.n_users);
      for (; assigned < until; ++assigned) role_of[assigned] = cfg.roles[r].name;
    }
    for (; assigned < cfg.n_users; ++assigned) role_of[assigned] = cfg.roles.back().name;
  }

  // one stream per log type, plus separate streams for insider selection and
  // injection, so adding an activity type never perturbs the others
  Rng rng_logon(derive_seed(cfg.seed, "synth/logon"));
  Rng rng_device(derive_seed(cfg.seed, "synth/device"));
  Rng rng_file(derive_seed(cfg.seed, "synth/file"));
  Rng rng_http(derive_seed(cfg.seed, "synth/http"));
  Rng rng_email(derive_seed(cfg.seed, "synth/email"));

  synth_detail::EventSink sink;
  std::vector<std::size_t> workdays;
  for (std::size_t d = 0; d < cfg.days; ++d) {
    const TimePoint day = cfg.start + std::chrono::days{static_cast<long>(d)};
    if (synth_detail::weekend(day)) continue;
    workdays.push_back(d);
    synth_detail::NormalDay normal{cfg, sink};
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
      normal.emit(u, day, rng_logon, rng_device, rng_file, rng_http, rng_email);
    }
  }

  // pick insiders and inject scenarios
  std::vector<std::size_t> user_order(cfg.n_users);
  for (std::size_t i = 0; i < cfg.n_users; ++i) user_order[i] = i;
  Rng rng_pick(derive_seed(cfg.seed, "synth/insiders"));
  rng_pick.shuffle(user_order);

  GroundTruth truth;
  for (std::size_t i = 0; i < cfg.n_insiders; ++i) {
    const std::size_t u = user_order[i];
    const std::string scenario = cfg.scenarios[i % cfg.scenarios.size()];

    // candidate window: a contiguous stretch of workdays past the opening fifth.
    // Injection goes to a scratch sink first and is committed only once it
    // covers enough distinct days for downstream cross validation.
    for (int attempt = 0;; ++attempt) {
      Rng rng(derive_seed(cfg.seed, "synth/inject/" + synth_detail::user_id(u) + "/" +
                                        std::to_string(attempt)));
      const std::size_t span = std::min<std::size_t>(workdays.size(), 12);
      const std::size_t max_first = workdays.size() - span;
      const std::size_t lo = std::min(workdays.size() / 5, max_first);
      const std::size_t first = lo + rng.below(max_first - lo + 1);
      const std::vector<std::size_t> candidates(workdays.begin() + static_cast<long>(first),
                                                workdays.begin() + static_cast<long>(first + span));

      synth_detail::EventSink scratch;
      synth_detail::ScenarioInjector injector{cfg, scratch};
      const auto touched = injector.inject(scenario, u, rng, candidates);
      if (touched.size() >= 3) {
        for (const EventKind kind : {EventKind::logon, EventKind::device, EventKind::file,
                                     EventKind::http, EventKind::email}) {
          auto& from = scratch.of(kind);
          auto& to = sink.of(kind);
          to.insert(to.end(), from.begin(), from.end());
        }
        // the ground-truth window spans the injected days
        const TimePoint win_start =
            cfg.start + std::chrono::days{static_cast<long>(*touched.begin())};
        const TimePoint win_end = cfg.start +
                                  std::chrono::days{static_cast<long>(*touched.rbegin())} +
                                  std::chrono::hours{24} - std::chrono::seconds{1};
        truth.insiders[synth_detail::user_id(u)] = InsiderWindow{scenario, win_start, win_end};
        break;
      }
      if (attempt > 20)
        throw std::runtime_error("synth: could not place scenario for " +
                                 synth_detail::user_id(u));
    }
  }

  // write the five activity logs
  const fs::path dir(out_dir);
  synth_detail::write_log(dir / "logon.csv", 'L', sink.logon,
                          {"id", "date", "user", "pc", "activity"}, {"activity"});
  synth_detail::write_log(dir / "device.csv", 'D', sink.device,
                          {"id", "date", "user", "pc", "activity"}, {"activity"});
  synth_detail::write_log(dir / "file.csv", 'F', sink.file,
                          {"id", "date", "user", "pc", "filename"}, {"filename"});
  synth_detail::write_log(dir / "http.csv", 'H', sink.http, {"id", "date", "user", "pc", "url"},
                          {"url"});
  synth_detail::write_log(dir / "email.csv", 'E', sink.email,
                          {"id", "date", "user", "pc", "to", "cc", "bcc", "from", "size",
                           "attachment_count"},
                          {"to", "cc", "bcc", "from", "size", "attachment_count"});

  {
    std::ofstream roles(dir / "roles.csv");
    if (!roles) throw std::runtime_error("synth: cannot write roles.csv");
    write_csv_row(roles, {"user", "role"});
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
      write_csv_row(roles, {synth_detail::user_id(u), role_of[u]});
    }
  }
  {
    std::ofstream insiders(dir / "insiders.csv");
    if (!insiders) throw std::runtime_error("synth: cannot write insiders.csv");
    write_csv_row(insiders, {"user", "scenario", "start", "end"});
    for (const auto& [user, w] : truth.insiders) {
      write_csv_row(insiders,
                    {user, w.scenario, format_timestamp(w.start), format_timestamp(w.end)});
    }
  }
  {
    nlohmann::json manifest;
    manifest["seed"] = cfg.seed;
    manifest["n_users"] = cfg.n_users;
    manifest["n_insiders"] = cfg.n_insiders;
    manifest["days"] = cfg.days;
    manifest["scenarios"] = cfg.scenarios;
    manifest["start"] = format_timestamp(cfg.start);
    for (const auto& r : cfg.roles) {
      manifest["roles"].push_back({{"name", r.name}, {"proportion", r.proportion}});
    }
    for (const auto& [key, value] : cfg.noise) manifest["noise"][key] = value;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("synth: cannot write manifest.json");
    out << manifest.dump(2) << '\n';
  }

  truth.validate();
  return truth;
}

/// The five activity-log paths under a generated directory, in parse order.
inline std::vector<std::string> log_paths(const std::string& dir) {
  std::vector<std::string> out;
  for (const char* name : {"logon.csv", "device.csv", "file.csv", "http.csv", "email.csv"}) {
    out.push_back((std::filesystem::path(dir) / name).string());
  }
  return out;
}

}  // namespace anythreat
