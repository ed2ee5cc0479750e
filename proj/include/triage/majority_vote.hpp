#pragma once

#include <exception>
#include <map>
#include <vector>

#include "triage/error.hpp"

namespace triage {

template <class Verdict>
struct VoteOutcome {
    Verdict verdict{};
    std::map<Verdict, int> tally;
    std::vector<Verdict> votes;  // in vote-index order
};

/// Runs `run_once(vote_index)` n times and returns the modal verdict.
///
/// Ties between modal verdicts go to the most conservative one, i.e. the
/// lowest `rank(verdict)`. A vote that throws counts as `on_failure`.
template <class Verdict, class RunOnce, class Rank>
VoteOutcome<Verdict> majority_vote(RunOnce&& run_once, int n, Verdict on_failure, Rank&& rank) {
    if (n < 1 || n % 2 == 0) throw Error("vote count must be a positive odd integer");
    VoteOutcome<Verdict> out;
    out.votes.reserve(n);
    for (int i = 0; i < n; ++i) {
        Verdict v = on_failure;
        try {
            v = run_once(i);
        } catch (const std::exception&) {
            v = on_failure;
        }
        out.votes.push_back(v);
        ++out.tally[v];
    }
    bool first = true;
    int best = 0;
    for (const auto& [verdict, count] : out.tally) {
        if (first || count > best || (count == best && rank(verdict) < rank(out.verdict))) {
            out.verdict = verdict;
            best = count;
            first = false;
        }
    }
    return out;
}

}  // namespace triage
