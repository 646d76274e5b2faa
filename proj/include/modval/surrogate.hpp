#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modval/common.hpp"
#include "modval/csv.hpp"

namespace modval {

enum class LossKind { mse, mae, relative };
enum class RegKind { none, l1, l2 };
enum class OptimizerKind { sgd, adam };

struct TrainingConfig {
    std::vector<int> hidden;          // hidden layer widths
    LossKind loss = LossKind::mse;
    double lambda = 0.0;              // regularization weight
    RegKind reg = RegKind::none;
    double gamma = 0.0;               // output-correlation regularizer weight
    double learning_rate = 1e-2;
    int batch_size = 32;
    int epochs = 1;
    OptimizerKind optimizer = OptimizerKind::adam;
    std::uint64_t seed = 0;
    double relative_guard = 1e-9;     // |y| below this is excluded from relative loss

    void validate() const {
        require(learning_rate >= 0.0, "training: learning rate must be >= 0");
        require(lambda >= 0.0 && gamma >= 0.0, "training: lambda and gamma must be >= 0");
        require(epochs >= 1, "training: epochs must be >= 1");
        require(batch_size >= 1, "training: batch size must be >= 1");
        for (int h : hidden) require(h >= 1, "training: hidden widths must be >= 1");
    }
};

// Feed-forward network, ReLU hidden activations, identity output.
struct SurrogateModel {
    std::vector<int> widths;          // [n, h1, ..., m]
    std::vector<Matrix> W;            // W[l] maps widths[l] -> widths[l+1]
    std::vector<Vector> b;

    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    std::size_t layers() const { return W.size(); }

    std::size_t parameter_count() const {
        std::size_t p = 0;
        for (std::size_t l = 0; l < W.size(); ++l)
            p += static_cast<std::size_t>(W[l].size() + b[l].size());
        return p;
    }

    // uniform init scaled by fan-in, seeded
    static SurrogateModel init(int inputs, const std::vector<int>& hidden, int outputs,
                               std::uint64_t seed) {
        require(inputs >= 1 && outputs >= 1, "model: widths must be positive");
        SurrogateModel m;
        m.widths.push_back(inputs);
        for (int h : hidden) m.widths.push_back(h);
        m.widths.push_back(outputs);
        for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
            const int fan_in = m.widths[l];
            const int fan_out = m.widths[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            auto rng = make_rng(seed, l);
            std::uniform_real_distribution<double> unif(-bound, bound);
            Matrix w(fan_out, fan_in);
            for (Index i = 0; i < w.rows(); ++i)
                for (Index j = 0; j < w.cols(); ++j) w(i, j) = unif(rng);
            m.W.push_back(std::move(w));
            m.b.push_back(Vector::Zero(fan_out));
        }
        return m;
    }

    // forward pass keeping pre-activations, for backprop
    void forward(const Matrix& X, std::vector<Matrix>& activations,
                 std::vector<Matrix>& preacts) const {
        activations.assign(1, X);
        preacts.clear();
        for (std::size_t l = 0; l < W.size(); ++l) {
            Matrix z = activations.back() * W[l].transpose();
            z.rowwise() += b[l].transpose();
            preacts.push_back(z);
            if (l + 1 < W.size()) activations.push_back(z.cwiseMax(0.0));
            else activations.push_back(z);
        }
    }

    Matrix predict(const Matrix& X) const {
        require(X.cols() == widths.front(), "predict: input width mismatch");
        Matrix a = X;
        for (std::size_t l = 0; l < W.size(); ++l) {
            Matrix z = a * W[l].transpose();
            z.rowwise() += b[l].transpose();
            a = (l + 1 < W.size()) ? z.cwiseMax(0.0) : std::move(z);
        }
        return a;
    }
};

// ---------------------------------------------------------------------------
// Loss family: E(W) + lambda R(W) + gamma ||C(Y) - C(Yhat)||_F
// ---------------------------------------------------------------------------

namespace detail {

inline double pooled_mse(const Matrix& y, const Matrix& yhat) {
    return (y - yhat).squaredNorm() / static_cast<double>(y.size());
}

// Pearson correlation matrix over batch rows; nullopt if any output has zero
// variance in the batch.
inline std::optional<Matrix> correlation_matrix(const Matrix& A) {
    const Index m = A.cols();
    Matrix centered = A.rowwise() - A.colwise().mean();
    Vector norms(m);
    for (Index j = 0; j < m; ++j) {
        norms(j) = centered.col(j).norm();
        if (norms(j) <= 0.0) return std::nullopt;
    }
    Matrix c = centered.transpose() * centered;
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) c(i, j) /= norms(i) * norms(j);
    return c;
}

}  // namespace detail

// ||C(Y) - C(Yhat)||_F over the batch.
inline double correlation_penalty(const Matrix& Y, const Matrix& Yhat) {
    require(Y.rows() == Yhat.rows() && Y.cols() == Yhat.cols(),
            "correlation_penalty: shape mismatch");
    require(Y.rows() >= 3, "correlation_penalty: batch size must be >= 3");
    require(Y.cols() >= 2, "correlation_penalty: needs m >= 2 outputs");
    auto cy = detail::correlation_matrix(Y);
    auto ch = detail::correlation_matrix(Yhat);
    require(cy.has_value() && ch.has_value(),
            "correlation_penalty: zero-variance output in batch");
    return (*cy - *ch).norm();
}

struct LossBreakdown {
    double error_term = 0.0;
    double reg_term = 0.0;      // lambda * R(W)
    double corr_term = 0.0;     // gamma * penalty
    double total = 0.0;
    long relative_excluded = 0; // |y| < guard cells excluded from relative loss
    bool corr_skipped = false;  // zero-variance batch
};

namespace detail {

inline double reg_value(std::span<const Matrix> W, RegKind reg) {
    double r = 0.0;
    for (const auto& w : W) {
        if (reg == RegKind::l2) r += 0.5 * w.squaredNorm();
        else if (reg == RegKind::l1) r += w.cwiseAbs().sum();
    }
    return r;
}

// error term + its gradient wrt yhat (gradient optional)
inline double error_term(const Matrix& Yhat, const Matrix& Y, const TrainingConfig& cfg,
                         Matrix* grad, long* excluded) {
    const double cells = static_cast<double>(Y.rows() * Y.cols());
    if (grad) grad->setZero(Y.rows(), Y.cols());
    double acc = 0.0;
    if (cfg.loss == LossKind::mse) {
        Matrix e = Y - Yhat;
        acc = e.squaredNorm() / cells;
        if (grad) *grad = -2.0 * e / cells;
    } else if (cfg.loss == LossKind::mae) {
        Matrix e = Y - Yhat;
        acc = e.cwiseAbs().sum() / cells;
        if (grad) *grad = -e.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }) / cells;
    } else {
        long n_inc = 0;
        for (Index i = 0; i < Y.rows(); ++i)
            for (Index j = 0; j < Y.cols(); ++j)
                if (std::abs(Y(i, j)) >= cfg.relative_guard) ++n_inc;
        if (excluded) *excluded += static_cast<long>(Y.rows() * Y.cols()) - n_inc;
        require(n_inc > 0, "loss: relative loss undefined, all targets below guard");
        for (Index i = 0; i < Y.rows(); ++i)
            for (Index j = 0; j < Y.cols(); ++j) {
                const double y = Y(i, j);
                if (std::abs(y) < cfg.relative_guard) continue;
                const double r = (y - Yhat(i, j)) / y;
                acc += std::abs(r);
                if (grad) {
                    const double s = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
                    (*grad)(i, j) = -s / (y * static_cast<double>(n_inc));
                }
            }
        acc /= static_cast<double>(n_inc);
    }
    return acc;
}

// gradient of ||C(Y)-C(Yhat)||_F wrt Yhat (Y held fixed)
inline Matrix correlation_penalty_gradient(const Matrix& Y, const Matrix& Yhat, double penalty) {
    const Index n = Yhat.rows(), m = Yhat.cols();
    Matrix grad = Matrix::Zero(n, m);
    if (penalty <= 0.0) return grad;
    auto cy = correlation_matrix(Y);
    auto ch = correlation_matrix(Yhat);
    if (!cy || !ch) return grad;
    Matrix D = *ch - *cy;  // P = ||D||_F
    Matrix centered = Yhat.rowwise() - Yhat.colwise().mean();
    Vector norms(m);
    for (Index j = 0; j < m; ++j) norms(j) = centered.col(j).norm();
    Matrix unit = centered;
    for (Index j = 0; j < m; ++j) unit.col(j) /= norms(j);
    for (Index i = 0; i < m; ++i) {
        Vector acc = Vector::Zero(n);
        for (Index q = 0; q < m; ++q) {
            if (q == i) continue;
            const double r = (*ch)(i, q);
            acc += (D(i, q) / penalty) * (unit.col(q) - r * unit.col(i));
        }
        grad.col(i) = 2.0 * acc / norms(i);
    }
    return grad;
}

}  // namespace detail

// Full loss on one batch. The correlation term is skipped (and flagged) when
// any output has zero variance in the batch or the batch is too small.
inline LossBreakdown loss(const Matrix& Yhat, const Matrix& Y, std::span<const Matrix> W,
                          const TrainingConfig& cfg) {
    require(Yhat.rows() == Y.rows() && Yhat.cols() == Y.cols(), "loss: shape mismatch");
    LossBreakdown out;
    out.error_term = detail::error_term(Yhat, Y, cfg, nullptr, &out.relative_excluded);
    out.reg_term = cfg.lambda * detail::reg_value(W, cfg.reg);
    if (cfg.gamma > 0.0 && Y.cols() >= 2 && Y.rows() >= 3) {
        auto cy = detail::correlation_matrix(Y);
        auto ch = detail::correlation_matrix(Yhat);
        if (cy && ch) out.corr_term = cfg.gamma * (*cy - *ch).norm();
        else out.corr_skipped = true;
    } else if (cfg.gamma > 0.0) {
        out.corr_skipped = true;
    }
    out.total = out.error_term + out.reg_term + out.corr_term;
    return out;
}

struct Gradients {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
};

// Analytic gradient of the full loss via backpropagation. Matches central
// finite differences; checked by the acceptance suite over the whole
// loss-configuration grid.
inline std::pair<LossBreakdown, Gradients> loss_and_gradients(const SurrogateModel& model,
                                                              const Matrix& X, const Matrix& Y,
                                                              const TrainingConfig& cfg) {
    std::vector<Matrix> acts, pre;
    model.forward(X, acts, pre);
    const Matrix& yhat = acts.back();

    LossBreakdown lb;
    Matrix dE;
    lb.error_term = detail::error_term(yhat, Y, cfg, &dE, &lb.relative_excluded);
    lb.reg_term = cfg.lambda * detail::reg_value(model.W, cfg.reg);
    Matrix dCorr = Matrix::Zero(Y.rows(), Y.cols());
    if (cfg.gamma > 0.0 && Y.cols() >= 2 && Y.rows() >= 3) {
        auto cy = detail::correlation_matrix(Y);
        auto ch = detail::correlation_matrix(yhat);
        if (cy && ch) {
            const double pen = (*cy - *ch).norm();
            lb.corr_term = cfg.gamma * pen;
            dCorr = cfg.gamma * detail::correlation_penalty_gradient(Y, yhat, pen);
        } else {
            lb.corr_skipped = true;
        }
    } else if (cfg.gamma > 0.0) {
        lb.corr_skipped = true;
    }
    lb.total = lb.error_term + lb.reg_term + lb.corr_term;

    Gradients g;
    g.dW.resize(model.layers());
    g.db.resize(model.layers());
    Matrix delta = dE + dCorr;  // output layer is identity
    for (std::size_t l = model.layers(); l-- > 0;) {
        g.dW[l] = delta.transpose() * acts[l];
        g.db[l] = delta.colwise().sum();
        if (l > 0) {
            delta = delta * model.W[l];
            delta = delta.cwiseProduct(
                pre[l - 1].unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; }));
        }
    }
    for (std::size_t l = 0; l < model.layers(); ++l) {
        if (cfg.reg == RegKind::l2) g.dW[l] += cfg.lambda * model.W[l];
        else if (cfg.reg == RegKind::l1)
            g.dW[l] += cfg.lambda * model.W[l].unaryExpr([](double v) {
                return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
            });
    }
    return {lb, std::move(g)};
}

// ---------------------------------------------------------------------------
// Training loop: mini-batch gradient descent / Adam on the full loss
// ---------------------------------------------------------------------------

struct TrainingDiverged : std::runtime_error {
    int epoch;
    explicit TrainingDiverged(int e)
        : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(e)),
          epoch(e) {}
};

struct EpochPoint {
    int epoch = 0;
    double train_error = 0.0;
    double eval_error = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    SurrogateModel model;
    std::vector<EpochPoint> trace;
    long relative_excluded = 0;
    long corr_skipped_batches = 0;
};

inline TrainResult train(const Matrix& X, const Matrix& Y, const TrainingConfig& cfg,
                         const Matrix* X_eval = nullptr, const Matrix* Y_eval = nullptr) {
    cfg.validate();
    require(X.rows() == Y.rows() && X.rows() >= 1, "train: shape mismatch");
    TrainResult out;
    out.model = SurrogateModel::init(static_cast<int>(X.cols()), cfg.hidden,
                                     static_cast<int>(Y.cols()), cfg.seed);

    // Adam state
    std::vector<Matrix> mW, vW;
    std::vector<Vector> mB, vB;
    if (cfg.optimizer == OptimizerKind::adam) {
        for (std::size_t l = 0; l < out.model.layers(); ++l) {
            mW.push_back(Matrix::Zero(out.model.W[l].rows(), out.model.W[l].cols()));
            vW.push_back(Matrix::Zero(out.model.W[l].rows(), out.model.W[l].cols()));
            mB.push_back(Vector::Zero(out.model.b[l].size()));
            vB.push_back(Vector::Zero(out.model.b[l].size()));
        }
    }
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long adam_t = 0;

    std::vector<Index> order(static_cast<std::size_t>(X.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    TrainingConfig eval_cfg = cfg;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t len =
                std::min<std::size_t>(cfg.batch_size, order.size() - start);
            Matrix bx(static_cast<Index>(len), X.cols());
            Matrix by(static_cast<Index>(len), Y.cols());
            for (std::size_t i = 0; i < len; ++i) {
                bx.row(static_cast<Index>(i)) = X.row(order[start + i]);
                by.row(static_cast<Index>(i)) = Y.row(order[start + i]);
            }
            auto [lb, grads] = loss_and_gradients(out.model, bx, by, cfg);
            if (!std::isfinite(lb.total)) throw TrainingDiverged(epoch);
            out.relative_excluded += lb.relative_excluded;
            out.corr_skipped_batches += lb.corr_skipped ? 1 : 0;
            if (cfg.optimizer == OptimizerKind::sgd) {
                for (std::size_t l = 0; l < out.model.layers(); ++l) {
                    out.model.W[l] -= cfg.learning_rate * grads.dW[l];
                    out.model.b[l] -= cfg.learning_rate * grads.db[l];
                }
            } else {
                ++adam_t;
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
                for (std::size_t l = 0; l < out.model.layers(); ++l) {
                    mW[l] = beta1 * mW[l] + (1 - beta1) * grads.dW[l];
                    vW[l] = beta2 * vW[l] + (1 - beta2) * grads.dW[l].cwiseProduct(grads.dW[l]);
                    mB[l] = beta1 * mB[l] + (1 - beta1) * grads.db[l];
                    vB[l] = beta2 * vB[l] + (1 - beta2) * grads.db[l].cwiseProduct(grads.db[l]);
                    out.model.W[l] -=
                        (cfg.learning_rate * (mW[l] / c1).array() /
                         ((vW[l] / c2).array().sqrt() + adam_eps)).matrix();
                    out.model.b[l] -=
                        (cfg.learning_rate * (mB[l] / c1).array() /
                         ((vB[l] / c2).array().sqrt() + adam_eps)).matrix();
                }
            }
        }
        EpochPoint pt;
        pt.epoch = epoch;
        pt.train_error = detail::error_term(out.model.predict(X), Y, eval_cfg, nullptr, nullptr);
        if (X_eval && Y_eval && X_eval->rows() > 0)
            pt.eval_error =
                detail::error_term(out.model.predict(*X_eval), *Y_eval, eval_cfg, nullptr, nullptr);
        if (!std::isfinite(pt.train_error)) throw TrainingDiverged(epoch);
        out.trace.push_back(pt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prediction tables
// ---------------------------------------------------------------------------

struct PredictionTable {
    std::vector<long> row_ids;
    Matrix Y;      // ground truth
    Matrix Yhat;   // predictions

    int m() const { return static_cast<int>(Y.cols()); }
    Index rows() const { return Y.rows(); }

    void validate() const {
        require(Y.rows() == Yhat.rows() && Y.cols() == Yhat.cols(),
                "prediction table: misaligned");
        require(static_cast<Index>(row_ids.size()) == Y.rows(), "prediction table: bad ids");
        require(Y.allFinite() && Yhat.allFinite(), "prediction table: non-finite values");
    }
};

inline PredictionTable make_prediction_table(const SurrogateModel& model, const Matrix& X,
                                             const Matrix& Y,
                                             const std::vector<long>* ids = nullptr) {
    PredictionTable pt;
    pt.Y = Y;
    pt.Yhat = model.predict(X);
    if (ids) pt.row_ids = *ids;
    else {
        pt.row_ids.resize(static_cast<std::size_t>(Y.rows()));
        std::iota(pt.row_ids.begin(), pt.row_ids.end(), 0L);
    }
    pt.validate();
    return pt;
}

// CSV layout: id, y1..ym, yhat1..yhatm (header row).
inline PredictionTable import_predictions(const std::string& path) {
    auto records = csv::parse_file(path);
    if (records.size() < 2) throw std::runtime_error("import_predictions: no rows in " + path);
    const auto& header = records.front();
    if (header.size() < 3 || (header.size() - 1) % 2 != 0)
        throw std::runtime_error("import_predictions: misaligned header (need id, y1..ym, yhat1..yhatm)");
    const int m = static_cast<int>((header.size() - 1) / 2);
    for (int j = 0; j < m; ++j) {
        if (header[1 + static_cast<std::size_t>(j)] != "y" + std::to_string(j + 1) ||
            header[1 + static_cast<std::size_t>(m + j)] != "yhat" + std::to_string(j + 1))
            throw std::runtime_error("import_predictions: unexpected column names");
    }
    PredictionTable pt;
    const Index n = static_cast<Index>(records.size() - 1);
    pt.Y.resize(n, m);
    pt.Yhat.resize(n, m);
    for (Index r = 0; r < n; ++r) {
        const auto& row = records[static_cast<std::size_t>(r) + 1];
        if (row.size() != header.size())
            throw std::runtime_error("import_predictions: row " + std::to_string(r + 1) +
                                     " misaligned");
        double v;
        if (!detail::parse_double(row[0], v))
            throw std::runtime_error("import_predictions: bad id at row " + std::to_string(r + 1));
        pt.row_ids.push_back(static_cast<long>(v));
        for (int j = 0; j < 2 * m; ++j) {
            if (!detail::parse_double(row[1 + static_cast<std::size_t>(j)], v))
                throw std::runtime_error("import_predictions: unparseable cell at row " +
                                         std::to_string(r + 1));
            if (j < m) pt.Y(r, j) = v;
            else pt.Yhat(r, j - m) = v;
        }
    }
    pt.validate();
    return pt;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline nlohmann::json training_config_to_json(const TrainingConfig& cfg) {
    return {{"hidden", cfg.hidden},
            {"loss", cfg.loss == LossKind::mse ? "mse" : (cfg.loss == LossKind::mae ? "mae" : "relative")},
            {"lambda", cfg.lambda},
            {"reg", cfg.reg == RegKind::none ? "none" : (cfg.reg == RegKind::l1 ? "l1" : "l2")},
            {"gamma", cfg.gamma},
            {"learning_rate", cfg.learning_rate},
            {"batch_size", cfg.batch_size},
            {"epochs", cfg.epochs},
            {"optimizer", cfg.optimizer == OptimizerKind::sgd ? "sgd" : "adam"},
            {"seed", cfg.seed}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
    TrainingConfig cfg;
    cfg.hidden = j.value("hidden", std::vector<int>{});
    const std::string loss = j.value("loss", "mse");
    cfg.loss = loss == "mae" ? LossKind::mae : (loss == "relative" ? LossKind::relative : LossKind::mse);
    cfg.lambda = j.value("lambda", 0.0);
    const std::string reg = j.value("reg", "none");
    cfg.reg = reg == "l1" ? RegKind::l1 : (reg == "l2" ? RegKind::l2 : RegKind::none);
    cfg.gamma = j.value("gamma", 0.0);
    cfg.learning_rate = j.value("learning_rate", 1e-2);
    cfg.batch_size = j.value("batch_size", 32);
    cfg.epochs = j.value("epochs", 1);
    cfg.optimizer = j.value("optimizer", "adam") == std::string("sgd") ? OptimizerKind::sgd
                                                                       : OptimizerKind::adam;
    cfg.seed = j.value("seed", std::uint64_t{0});
    return cfg;
}

inline nlohmann::json model_to_json(const SurrogateModel& model, const TrainingConfig& cfg) {
    nlohmann::json j;
    j["widths"] = model.widths;
    std::vector<double> weights, biases;
    for (std::size_t l = 0; l < model.layers(); ++l) {
        weights.insert(weights.end(), model.W[l].data(), model.W[l].data() + model.W[l].size());
        biases.insert(biases.end(), model.b[l].data(), model.b[l].data() + model.b[l].size());
    }
    j["weights"] = weights;
    j["biases"] = biases;
    j["config"] = training_config_to_json(cfg);
    j["seed"] = cfg.seed;
    return j;
}

inline SurrogateModel model_from_json(const nlohmann::json& j) {
    SurrogateModel m;
    m.widths = j.at("widths").get<std::vector<int>>();
    require(m.widths.size() >= 2, "checkpoint: need at least input and output widths");
    const auto weights = j.at("weights").get<std::vector<double>>();
    const auto biases = j.at("biases").get<std::vector<double>>();
    std::size_t wpos = 0, bpos = 0;
    for (std::size_t l = 0; l + 1 < m.widths.size(); ++l) {
        Matrix w(m.widths[l + 1], m.widths[l]);
        require(wpos + static_cast<std::size_t>(w.size()) <= weights.size(),
                "checkpoint: weight array too short");
        std::copy(weights.begin() + static_cast<long>(wpos),
                  weights.begin() + static_cast<long>(wpos + static_cast<std::size_t>(w.size())),
                  w.data());
        wpos += static_cast<std::size_t>(w.size());
        Vector bv(m.widths[l + 1]);
        require(bpos + static_cast<std::size_t>(bv.size()) <= biases.size(),
                "checkpoint: bias array too short");
        std::copy(biases.begin() + static_cast<long>(bpos),
                  biases.begin() + static_cast<long>(bpos + static_cast<std::size_t>(bv.size())),
                  bv.data());
        bpos += static_cast<std::size_t>(bv.size());
        m.W.push_back(std::move(w));
        m.b.push_back(std::move(bv));
    }
    require(wpos == weights.size() && bpos == biases.size(), "checkpoint: trailing parameters");
    for (const auto& w : m.W) require(w.allFinite(), "checkpoint: non-finite parameters");
    return m;
}

inline void save_model(const SurrogateModel& model, const TrainingConfig& cfg,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot write " + path);
    out << model_to_json(model, cfg).dump(2) << "\n";
}

inline std::pair<SurrogateModel, TrainingConfig> load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return {model_from_json(j), training_config_from_json(j.at("config"))};
}

}  // namespace modval
