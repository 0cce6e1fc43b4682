#include <cmath>
#include <numeric>
#include <sstream>

#include "nn_internal.hpp"
#include "qfs/error.hpp"
#include "qfs/log.hpp"
#include "qfs/neural.hpp"

namespace qfs::nn {

TrainConfig TrainConfig::nnc_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::pooled_defaults()
{
    TrainConfig c;
    c.epochs = 8;
    c.batch_size = 32;
    c.dropout_rate = 0.8;
    c.clip_len = 250;
    return c;
}

void TrainConfig::validate() const
{
    if (epochs == 0) {
        throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
    }
    if (batch_size == 0) {
        throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "dropout rate must lie in [0, 1)");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
    }
    if (clip_len == 0 || hidden_dim == 0 || lstm_dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "clip length and layer sizes must be >= 1");
    }
}

std::vector<NncSample> make_nnc_samples(std::span<const LabeledExample> examples, const embed::EmbeddingTable& table,
                                        std::size_t clip_len)
{
    std::vector<NncSample> out;
    out.reserve(examples.size());
    auto embed = [&](const std::vector<std::string>& toks) {
        if (toks.empty()) {
            MatrixXd m(1, static_cast<Eigen::Index>(table.dim()));
            m.row(0) = table.oov_vector().transpose();
            return m;
        }
        return embed::embed_tokens(table, toks, clip_len);
    };
    for (const auto& ex : examples) {
        out.push_back({embed(ex.question_tokens), embed(ex.sentence_tokens), position_feature(ex.position), ex.label});
    }
    return out;
}

std::vector<PooledSample> make_pooled_samples(std::span<const LabeledExample> examples,
                                              const embed::PooledFeatures& features)
{
    std::vector<PooledSample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        const auto* v = features.find(ex.pair_id);
        if (v == nullptr) {
            throw Error(ErrorCode::ScorerInputMissing, "no contextual embedding for pair '" + ex.pair_id + "'");
        }
        out.push_back({*v, position_feature(ex.position), ex.label});
    }
    return out;
}

namespace {

constexpr double kGradFloor = 1e-6;

class Adam {
  public:
    Adam(const ConstBlocks& shape, double lr, AdamConfig cfg = {}) : lr_(lr), cfg_(cfg)
    {
        for (auto b : shape) {
            m_.emplace_back(b.size(), 0.0);
            v_.emplace_back(b.size(), 0.0);
        }
    }

    void step(const Blocks& params, const ConstBlocks& grads)
    {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t b = 0; b < params.size(); ++b) {
            auto p = params[b];
            auto g = grads[b];
            auto& m = m_[b];
            auto& v = v_[b];
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
            }
        }
    }

  private:
    double lr_;
    AdamConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

template <typename Params>
void scale_blocks(Params& p, double factor)
{
    for (auto b : p.blocks()) {
        for (auto& v : b) {
            v *= factor;
        }
    }
}

template <typename Params>
void zero_blocks(Params& p)
{
    for (auto b : p.blocks()) {
        std::fill(b.begin(), b.end(), 0.0);
    }
}

double loss_of(const NncParams& p, const NncSample& s)
{
    return bce_loss(nnc_forward(p, s.question, s.sentence, s.position), s.label);
}

double loss_of(const PooledParams& p, const PooledSample& s)
{
    return bce_loss(pooled_forward(p, s.sentence, s.position), s.label);
}

using ReluPattern = std::vector<bool>;

ReluPattern pattern_of(const VectorXd& pre)
{
    ReluPattern out(static_cast<std::size_t>(pre.size()));
    for (Eigen::Index j = 0; j < pre.size(); ++j) {
        out[static_cast<std::size_t>(j)] = pre(j) > 0.0;
    }
    return out;
}

ReluPattern relu_pattern(const NncParams& p, const NncSample& s)
{
    auto q = bilstm_encode(p.encoder, s.question);
    auto v = bilstm_encode(p.encoder, s.sentence);
    return pattern_of(detail::head_run(p.head, detail::nnc_features(q, v, s.position), nullptr).pre);
}

ReluPattern relu_pattern(const PooledParams& p, const PooledSample& s)
{
    return pattern_of(detail::head_run(p.head, detail::pooled_features(s.sentence, s.position), nullptr).pre);
}

double nll_and_grad(const NncParams& p, const NncSample& s, const VectorXd* mask, NncParams& g)
{
    return nnc_loss_and_grad(p, s, mask, g);
}

double nll_and_grad(const PooledParams& p, const PooledSample& s, const VectorXd* mask, PooledParams& g)
{
    return pooled_loss_and_grad(p, s, mask, g);
}

template <typename Params, typename Sample>
double mean_loss(const Params& params, std::span<const Sample> samples)
{
    double total = 0.0;
    for (const auto& s : samples) {
        total += loss_of(params, s);
    }
    return total / static_cast<double>(samples.size());
}

template <typename Params, typename Sample>
TrainResult run_training(Params params, std::span<const Sample> samples, const TrainConfig& config)
{
    Rng shuffle_rng(derive_seed(config.seed, 1));
    Rng mask_rng(config.mask_seed.value_or(derive_seed(config.seed, 2)));
    Params grad = params;
    Adam adam(std::as_const(params).blocks(), config.learning_rate);
    const auto hidden = static_cast<Eigen::Index>(params.head.hidden_dim());
    const double keep_scale = 1.0 / (1.0 - config.dropout_rate);
    VectorXd mask(hidden);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> history;
    history.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            zero_blocks(grad);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const VectorXd* mask_ptr = nullptr;
                if (config.dropout_rate > 0.0) {
                    for (Eigen::Index i = 0; i < hidden; ++i) {
                        mask[i] = mask_rng.unit() < config.dropout_rate ? 0.0 : keep_scale;
                    }
                    mask_ptr = &mask;
                }
                batch_loss += nll_and_grad(params, samples[order[k]], mask_ptr, grad);
            }
            if (!std::isfinite(batch_loss)) {
                std::ostringstream msg;
                msg << "loss became " << batch_loss << " in epoch " << epoch + 1 << " at batch starting " << start;
                throw Error(ErrorCode::NonFiniteLoss, msg.str());
            }
            scale_blocks(grad, 1.0 / static_cast<double>(stop - start));
            adam.step(params.blocks(), std::as_const(grad).blocks());
        }
        const double epoch_loss = mean_loss(params, samples);
        if (!std::isfinite(epoch_loss)) {
            throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch + 1) + " training loss is not finite");
        }
        spdlog::info("epoch {}/{}: loss {:.6f}", epoch + 1, config.epochs, epoch_loss);
        history.push_back(epoch_loss);
    }
    return {std::move(params), std::move(history)};
}

template <typename Params, typename Sample>
GradCheckResult check_gradients(const Params& params, const Sample& sample, double epsilon)
{
    Params grad = params;
    zero_blocks(grad);
    nll_and_grad(params, sample, nullptr, grad);
    Params probe = params;
    const auto base_pattern = relu_pattern(params, sample);
    auto p_blocks = probe.blocks();
    auto g_blocks = std::as_const(grad).blocks();
    GradCheckResult result;
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
        for (std::size_t i = 0; i < p_blocks[b].size(); ++i) {
            const double orig = p_blocks[b][i];
            auto at = [&](double offset, bool& crossed) {
                p_blocks[b][i] = orig + offset;
                crossed = crossed || relu_pattern(probe, sample) != base_pattern;
                return loss_of(probe, sample);
            };
            // Five-point central stencil; the step shrinks while the stencil
            // straddles a relu kink, where the loss is not differentiable.
            double step = epsilon;
            double numeric = 0.0;
            for (int attempt = 0; attempt < 12; ++attempt, step *= 0.25) {
                bool crossed = false;
                const double d1 = at(step, crossed) - at(-step, crossed);
                const double d2 = at(2.0 * step, crossed) - at(-2.0 * step, crossed);
                numeric = (8.0 * d1 - d2) / (12.0 * step);
                if (!crossed) {
                    break;
                }
                if (attempt == 0) {
                    ++result.n_step_reduced;
                }
            }
            p_blocks[b][i] = orig;
            const double analytic = g_blocks[b][i];
            const double scale = std::max(std::abs(numeric), std::abs(analytic));
            const double diff = std::abs(numeric - analytic);
            const double err = diff / std::max(scale, kGradFloor);
            if (err > result.max_error) {
                result.max_error = err;
                result.worst_block = b;
                result.worst_index = i;
            }
            ++result.n_params;
        }
    }
    return result;
}

template <typename Sample>
void require_samples(std::span<const Sample> samples)
{
    if (samples.empty()) {
        throw Error(ErrorCode::EmptyDataset, "training needs at least one example");
    }
}

}  // namespace

TrainResult train_nnc(std::span<const NncSample> samples, const TrainConfig& config)
{
    config.validate();
    require_samples(samples);
    Rng init_rng(derive_seed(config.seed, 0));
    const auto embed_dim = static_cast<std::size_t>(samples.front().sentence.cols());
    auto params = NncParams::init(embed_dim, config.lstm_dim, config.hidden_dim, init_rng);
    return run_training(std::move(params), samples, config);
}

TrainResult train_pooled(std::span<const PooledSample> samples, const TrainConfig& config)
{
    config.validate();
    require_samples(samples);
    Rng init_rng(derive_seed(config.seed, 0));
    const auto input_dim = static_cast<std::size_t>(samples.front().sentence.size());
    auto params = PooledParams::init(input_dim, config.hidden_dim, init_rng);
    return run_training(std::move(params), samples, config);
}

TrainResult train(ModelKind kind, std::span<const LabeledExample> examples, const EmbeddingSource& source,
                  const TrainConfig& config)
{
    if (examples.empty()) {
        throw Error(ErrorCode::EmptyDataset, "training needs at least one example");
    }
    if (kind == ModelKind::Nnc) {
        const auto* const* table = std::get_if<const embed::EmbeddingTable*>(&source);
        if (table == nullptr || *table == nullptr) {
            throw Error(ErrorCode::InvalidArgument, "the nnc model trains from word vectors");
        }
        auto samples = make_nnc_samples(examples, **table, config.clip_len);
        return train_nnc(samples, config);
    }
    const auto* const* features = std::get_if<const embed::PooledFeatures*>(&source);
    if (features == nullptr || *features == nullptr) {
        throw Error(ErrorCode::InvalidArgument, "the pooled model trains from contextual embeddings");
    }
    auto samples = make_pooled_samples(examples, **features);
    return train_pooled(samples, config);
}

double accuracy(const PooledParams& params, std::span<const PooledSample> samples)
{
    std::size_t correct = 0;
    for (const auto& s : samples) {
        const int pred = pooled_forward(params, s.sentence, s.position) >= 0.5 ? 1 : 0;
        correct += pred == s.label ? 1 : 0;
    }
    return samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
}

double accuracy(const NncParams& params, std::span<const NncSample> samples)
{
    std::size_t correct = 0;
    for (const auto& s : samples) {
        const int pred = nnc_forward(params, s.question, s.sentence, s.position) >= 0.5 ? 1 : 0;
        correct += pred == s.label ? 1 : 0;
    }
    return samples.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples.size());
}

GradCheckResult grad_check(const NncParams& params, const NncSample& sample, double epsilon)
{
    return check_gradients(params, sample, epsilon);
}

GradCheckResult grad_check(const PooledParams& params, const PooledSample& sample, double epsilon)
{
    return check_gradients(params, sample, epsilon);
}

}  // namespace qfs::nn
