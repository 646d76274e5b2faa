#pragma once

#include <string>
#include <vector>

#include "modval/common.hpp"
#include "modval/dataset.hpp"
#include "modval/surrogate.hpp"

namespace modval {

struct PfiEntry {
    int feature = 0;            // source feature index
    std::string name;
    double baseline_mse = 0.0;
    double permuted_mse = 0.0;  // mean over repeats
    double delta = 0.0;         // permuted - baseline
    int rank = 0;
};

struct PfiRanking {
    std::vector<PfiEntry> entries;  // sorted by delta descending, ties by feature index
    double baseline_mse = 0.0;
    int repeats = 0;
    std::uint64_t seed = 0;
};

// Shuffles one source feature at a time across the test rows (keeping its
// marginal distribution intact), re-evaluates the MSE and ranks features by
// the increase. All encoded columns of one source feature -- a cyclic
// (cos, sin) pair or a one-hot block -- are permuted together so permuted
// rows remain valid encodings. `predict` maps the (raw) encoded matrix to
// predictions, letting callers fold normalization/PCA into the pipeline.
inline PfiRanking permutation_importance(const std::function<Matrix(const Matrix&)>& predict,
                                         const EncodedMatrix& test, const Matrix& y,
                                         int repeats = 10, std::uint64_t seed = 0,
                                         unsigned jobs = 1, Index min_rows = 50) {
    require(test.values.rows() == y.rows(), "permutation_importance: row mismatch");
    require(test.values.rows() >= min_rows, "permutation_importance: test set too small");
    require(repeats >= 1, "permutation_importance: repeats must be >= 1");

    PfiRanking out;
    out.repeats = repeats;
    out.seed = seed;
    out.baseline_mse = detail::pooled_mse(y, predict(test.values));

    const int n_features = test.source_count;
    const Index n_rows = test.values.rows();
    out.entries.resize(static_cast<std::size_t>(n_features));
    parallel_for(static_cast<std::size_t>(n_features), jobs, [&](std::size_t f) {
        const auto cols = test.columns_of(static_cast<int>(f));
        double acc = 0.0;
        for (int r = 0; r < repeats; ++r) {
            auto rng = make_rng(mix_seed(seed, f), static_cast<std::uint64_t>(r));
            std::vector<Index> perm(static_cast<std::size_t>(n_rows));
            std::iota(perm.begin(), perm.end(), Index{0});
            std::shuffle(perm.begin(), perm.end(), rng);
            Matrix shuffled = test.values;
            for (int c : cols)
                for (Index i = 0; i < n_rows; ++i)
                    shuffled(i, c) = test.values(perm[static_cast<std::size_t>(i)], c);
            acc += detail::pooled_mse(y, predict(shuffled));
        }
        PfiEntry& e = out.entries[f];
        e.feature = static_cast<int>(f);
        e.name = "feature" + std::to_string(f);
        // source name, with any encode-part suffix stripped
        for (const auto& p : test.provenance)
            if (p.source == static_cast<int>(f)) {
                e.name = p.name.substr(0, p.name.find_first_of(".="));
                break;
            }
        e.baseline_mse = out.baseline_mse;
        e.permuted_mse = acc / repeats;
        e.delta = e.permuted_mse - out.baseline_mse;
    });
    std::sort(out.entries.begin(), out.entries.end(), [](const PfiEntry& a, const PfiEntry& b) {
        if (a.delta != b.delta) return a.delta > b.delta;
        return a.feature < b.feature;
    });
    for (std::size_t i = 0; i < out.entries.size(); ++i)
        out.entries[i].rank = static_cast<int>(i) + 1;
    return out;
}

inline PfiRanking permutation_importance(const SurrogateModel& model, const EncodedMatrix& test,
                                         const Matrix& y, int repeats = 10,
                                         std::uint64_t seed = 0, unsigned jobs = 1,
                                         Index min_rows = 50) {
    require(test.values.cols() == model.input_width(),
            "permutation_importance: model input width mismatch");
    return permutation_importance([&](const Matrix& x) { return model.predict(x); }, test, y,
                                  repeats, seed, jobs, min_rows);
}

}  // namespace modval
