#include "pairnas/hpt/study.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "pairnas/error.hpp"

namespace pairnas::hpt {

using nlohmann::json;

std::string_view status_name(TrialStatus s) {
  switch (s) {
    case TrialStatus::Pending: return "pending";
    case TrialStatus::Running: return "running";
    case TrialStatus::Done: return "done";
    case TrialStatus::Failed: return "failed";
  }
  return "?";
}

std::string_view mode_name(SamplerMode m) { return m == SamplerMode::Tpe ? "tpe" : "random"; }

SamplerMode parse_mode(std::string_view name) {
  if (name == "tpe") return SamplerMode::Tpe;
  if (name == "random") return SamplerMode::Random;
  throw ConfigError("unknown sampler mode '" + std::string(name) + "'");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

TrialStatus parse_status(const std::string& s) {
  if (s == "done") return TrialStatus::Done;
  if (s == "failed") return TrialStatus::Failed;
  if (s == "pending") return TrialStatus::Pending;
  if (s == "running") return TrialStatus::Running;
  throw ParseError("unknown trial status '" + s + "'");
}

}  // namespace

std::mt19937_64 suggestion_rng(std::uint64_t study_seed, int trial_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(study_seed), static_cast<std::uint32_t>(study_seed >> 32),
                    static_cast<std::uint32_t>(trial_id), 0x7e5u};
  return std::mt19937_64(seq);
}

std::uint64_t trial_seed(std::uint64_t study_seed, int trial_id) {
  return splitmix(splitmix(study_seed) ^ static_cast<std::uint64_t>(trial_id));
}

std::string trial_to_json(const Trial& t) {
  json j;
  j["id"] = t.id;
  j["params"] = json::parse(to_json(t.params));
  j["status"] = status_name(t.status);
  if (t.status == TrialStatus::Done) {
    j["objective"] = t.objective;
  } else {
    j["objective"] = nullptr;
  }
  j["seconds"] = t.seconds;
  if (!t.reason.empty()) j["reason"] = t.reason;
  return j.dump();
}

Trial trial_from_json(std::string_view line) {
  try {
    json j = json::parse(line);
    Trial t;
    t.id = j.at("id").get<int>();
    t.params = assignment_from_json(j.at("params").dump());
    t.status = parse_status(j.at("status").get<std::string>());
    if (!j.at("objective").is_null()) t.objective = j.at("objective").get<double>();
    t.seconds = j.value("seconds", 0.0);
    t.reason = j.value("reason", std::string());
    return t;
  } catch (const json::exception& e) {
    throw ParseError(std::string("trial record: ") + e.what());
  }
}

std::vector<Trial> read_study_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::vector<Trial> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(trial_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return out;
}

const Trial& best_trial(const std::vector<Trial>& trials) {
  const Trial* best = nullptr;
  for (const auto& t : trials) {
    if (t.status != TrialStatus::Done) continue;
    if (!best || t.objective > best->objective || (t.objective == best->objective && t.id < best->id)) best = &t;
  }
  if (!best) throw DegenerateError("no trial finished successfully");
  return *best;
}

std::vector<Trial> run_study(const SearchSpace& space, const Objective& objective, const StudyOptions& options) {
  space.validate();
  options.tpe.validate();
  if (options.n_trials < 1) throw ConfigError("a study needs at least one trial");
  if (options.concurrency < 1) throw ConfigError("concurrency must be at least 1");

  std::map<int, Trial> trials;
  std::vector<int> history_order;  // completion order, feeds the sampler
  if (!options.log_path.empty() && std::filesystem::exists(options.log_path)) {
    for (auto& t : read_study_log(options.log_path)) {
      if (t.id < 0 || t.id >= options.n_trials) continue;
      if (t.status != TrialStatus::Done && t.status != TrialStatus::Failed) continue;
      history_order.push_back(t.id);
      trials[t.id] = std::move(t);
    }
  }
  std::vector<int> todo;
  for (int id = 0; id < options.n_trials; ++id) {
    if (!trials.count(id)) todo.push_back(id);
  }

  std::ofstream log;
  if (!options.log_path.empty()) {
    log.open(options.log_path, std::ios::app);
    if (!log) throw ConfigError("cannot append to " + options.log_path.string());
  }

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Trial> finished;
  std::vector<std::thread> workers;
  std::size_t next = 0, next_to_log = 0;
  int running = 0;

  auto launch = [&](Trial trial) {
    workers.emplace_back([&, trial = std::move(trial)]() mutable {
      const auto start = std::chrono::steady_clock::now();
      try {
        const double v = objective(trial.params, TrialContext{trial.id, trial_seed(options.seed, trial.id)});
        if (std::isfinite(v)) {
          trial.status = TrialStatus::Done;
          trial.objective = v;
        } else {
          trial.status = TrialStatus::Failed;
          trial.reason = "non-finite objective";
        }
      } catch (const std::exception& e) {
        trial.status = TrialStatus::Failed;
        trial.reason = e.what();
      }
      trial.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard lock(mu);
      finished.push_back(std::move(trial));
      cv.notify_one();
    });
  };

  while (next < todo.size() || running > 0) {
    while (next < todo.size() && running < options.concurrency) {
      Trial t;
      t.id = todo[next++];
      t.status = TrialStatus::Running;
      auto rng = suggestion_rng(options.seed, t.id);
      if (options.mode == SamplerMode::Random) {
        t.params = sample_random(space, rng);
      } else {
        std::vector<Observation> obs;
        for (int id : history_order) {
          const Trial& done = trials.at(id);
          obs.push_back({&done.params, done.status == TrialStatus::Done ? done.objective
                                                                          : -std::numeric_limits<double>::infinity()});
        }
        t.params = suggest_tpe(space, obs, options.tpe, rng);
      }
      ++running;
      launch(std::move(t));
    }
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return !finished.empty(); });
    while (!finished.empty()) {
      Trial t = std::move(finished.front());
      finished.pop_front();
      --running;
      history_order.push_back(t.id);
      trials[t.id] = std::move(t);
    }
    lock.unlock();
    while (next_to_log < todo.size() && trials.count(todo[next_to_log])) {
      if (log.is_open()) log << trial_to_json(trials.at(todo[next_to_log])) << '\n' << std::flush;
      ++next_to_log;
    }
  }
  for (auto& w : workers) w.join();

  std::vector<Trial> out;
  for (auto& [id, t] : trials) out.push_back(std::move(t));
  return out;
}

}  // namespace pairnas::hpt
