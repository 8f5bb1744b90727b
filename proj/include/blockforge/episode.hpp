#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "blockforge/agents.hpp"

namespace blockforge {

// One transition-log record; scene_hash fingerprints the post-step scene.
struct StepRecord {
    int step = 0;
    Action action;
    double reward = 0.0;
    bool done = false;
    std::optional<TerminationReason> reason;
    std::uint64_t scene_hash = 0;
};

inline nlohmann::json to_json(const StepRecord& r) {
    return nlohmann::json{{"step", r.step},
                          {"action", to_json(r.action)},
                          {"reward", r.reward},
                          {"done", r.done},
                          {"reason", r.reason ? nlohmann::json(to_string(*r.reason))
                                              : nlohmann::json(nullptr)},
                          {"scene_hash", hash_hex(r.scene_hash)}};
}

inline StepRecord step_record_from_json(const nlohmann::json& j) {
    StepRecord r;
    r.step = j.at("step").get<int>();
    r.action = action_from_json(j.at("action"));
    r.reward = j.at("reward").get<double>();
    r.done = j.at("done").get<bool>();
    if (!j.at("reason").is_null())
        r.reason = termination_from_string(j.at("reason").get<std::string>());
    r.scene_hash = std::stoull(j.at("scene_hash").get<std::string>(), nullptr, 16);
    return r;
}

struct EpisodeLog {
    TaskId task = TaskId::Silhouette;
    int level = 1;
    std::uint64_t seed = 0;
    int max_steps = 40;
    Scene initial_scene;
    std::string policy;
    std::vector<StepRecord> steps;

    double total_reward() const {
        double t = 0.0;
        for (const auto& s : steps) t += s.reward;
        return t;
    }
};

inline std::string episode_log_to_jsonl(const EpisodeLog& log) {
    std::ostringstream out;
    nlohmann::json header{{"type", "header"},       {"version", 1},
                          {"task", to_string(log.task)}, {"level", log.level},
                          {"seed", log.seed},       {"max_steps", log.max_steps},
                          {"policy", log.policy},   {"scene", to_json(log.initial_scene)}};
    out << header.dump() << "\n";
    for (const auto& s : log.steps) out << to_json(s).dump() << "\n";
    return out.str();
}

inline EpisodeLog episode_log_from_jsonl(std::istream& in) {
    EpisodeLog log;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (j.value("type", "step") == "header") {
            log.task = task_from_string(j.at("task").get<std::string>());
            log.level = j.at("level").get<int>();
            log.seed = j.at("seed").get<std::uint64_t>();
            log.max_steps = j.at("max_steps").get<int>();
            log.policy = j.at("policy").get<std::string>();
            log.initial_scene = scene_from_json(j.at("scene"));
            saw_header = true;
        } else {
            log.steps.push_back(step_record_from_json(j));
        }
    }
    if (!saw_header) throw std::runtime_error("episode log has no header record");
    return log;
}

struct EpisodeResult {
    double ret = 0.0;
    int steps = 0;
    TerminationReason reason = TerminationReason::MaxSteps;
    bool completed = false;
};

// Runs one episode; a resigning policy ends the episode as MaxSteps so
// baseline statistics are not polluted by invalid-action deaths.
inline EpisodeResult run_episode(EpisodeState st, Policy& policy, Rng rng,
                                 EpisodeLog* log = nullptr, int n_offsets = 15) {
    EpisodeResult out;
    if (log) {
        log->task = st.task;
        log->max_steps = st.max_steps;
        log->initial_scene = st.scene;
        log->policy = policy.name();
    }
    while (!st.terminated) {
        ObsGraph g = build_graph(st.scene, st.inventory, Connectivity::Full);
        auto action = policy.act(st, g, rng);
        if (!action) {
            out.reason = TerminationReason::MaxSteps;  // resign
            break;
        }
        auto req = decode_action(st, g, *action, n_offsets);
        auto res = env_step(st, req);
        out.ret += res.reward;
        out.steps = st.step;
        if (log)
            log->steps.push_back(
                {st.step, *action, res.reward, res.done, res.reason, scene_hash(st.scene)});
        if (res.done) {
            out.reason = *res.reason;
            out.completed = res.reason == TerminationReason::Completed;
        }
    }
    return out;
}

// Replays a log against a fresh episode; returns false on the first
// mismatching scene hash or reward.
struct ReplayCheck {
    bool ok = true;
    int first_mismatch = -1;
    double total_reward = 0.0;
};

inline ReplayCheck replay_episode(const EpisodeLog& log, int n_offsets = 15) {
    ReplayCheck out;
    EpisodeState st = make_episode(log.initial_scene, log.task, log.max_steps);
    for (size_t i = 0; i < log.steps.size(); ++i) {
        const auto& rec = log.steps[i];
        ObsGraph g = build_graph(st.scene, st.inventory, Connectivity::Full);
        auto req = decode_action(st, g, rec.action, n_offsets);
        auto res = env_step(st, req);
        out.total_reward += res.reward;
        bool same = scene_hash(st.scene) == rec.scene_hash &&
                    std::abs(res.reward - rec.reward) == 0.0 && res.done == rec.done;
        if (!same) {
            out.ok = false;
            out.first_mismatch = static_cast<int>(i);
            return out;
        }
        if (res.done) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch evaluation with optional episode-level parallelism. Worker results
// merge deterministically by episode index.

struct EvalStats {
    int episodes = 0;
    double mean_return = 0.0;
    double median_return = 0.0;
    double completed_rate = 0.0;
    std::map<std::string, int> reasons;
    std::vector<double> returns;
};

inline EvalStats summarize(std::vector<EpisodeResult> results) {
    EvalStats s;
    s.episodes = static_cast<int>(results.size());
    if (results.empty()) return s;
    int completed = 0;
    for (const auto& r : results) {
        s.mean_return += r.ret;
        s.returns.push_back(r.ret);
        s.reasons[to_string(r.reason)] += 1;
        completed += r.completed ? 1 : 0;
    }
    s.mean_return /= s.episodes;
    s.completed_rate = static_cast<double>(completed) / s.episodes;
    std::vector<double> sorted = s.returns;
    std::sort(sorted.begin(), sorted.end());
    s.median_return = s.episodes % 2 == 1
                          ? sorted[s.episodes / 2]
                          : 0.5 * (sorted[s.episodes / 2 - 1] + sorted[s.episodes / 2]);
    return s;
}

struct EvalJob {
    TaskId task = TaskId::Silhouette;
    int episodes = 100;
    std::uint64_t seed = 0;
    bool hardest_only = false;
    int fixed_level = 0;  // > 0 pins the level
    double progress = 1.0;
    int max_steps = 40;
    int n_offsets = 15;
    int workers = 1;
};

// policy_factory must hand out an independent policy per worker.
inline std::vector<EpisodeResult> run_eval(
    const EvalJob& job, const std::function<std::unique_ptr<Policy>()>& policy_factory) {
    std::vector<EpisodeResult> results(job.episodes);
    Rng base(job.seed);
    auto run_range = [&](int lo, int hi, Policy& policy) {
        for (int i = lo; i < hi; ++i) {
            Rng ep = base.split("eval-episode").split(i);
            int level = job.fixed_level > 0
                            ? job.fixed_level
                            : sample_level(job.progress, job.task, ep, job.hardest_only);
            auto st = make_task_episode(job.task, level, ep.split("scene").next_u64(),
                                        job.max_steps);
            results[i] = run_episode(std::move(st), policy, ep.split("policy"), nullptr,
                                     job.n_offsets);
        }
    };
    int workers = std::max(1, job.workers);
    if (workers == 1) {
        auto policy = policy_factory();
        run_range(0, job.episodes, *policy);
    } else {
        std::vector<std::thread> threads;
        int chunk = (job.episodes + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            int lo = w * chunk, hi = std::min(job.episodes, (w + 1) * chunk);
            if (lo >= hi) break;
            threads.emplace_back([&, lo, hi]() {
                auto policy = policy_factory();
                run_range(lo, hi, *policy);
            });
        }
        for (auto& t : threads) t.join();
    }
    return results;
}

}  // namespace blockforge
