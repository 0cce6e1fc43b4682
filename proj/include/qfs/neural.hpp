#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qfs/embeddings.hpp"
#include "qfs/rng.hpp"

/// Sentence classifiers trained from scratch in double precision.
///
/// Two architectures share the same classification head (relu hidden layer
/// with dropout, sigmoid output):
///  - NNC: word vectors -> shared BiLSTM -> mean over time; features are
///    [sentence ; sentence * question ; position].
///  - Pooled: mean of frozen contextual token embeddings over the candidate
///    sentence; features are [sentence ; position].
namespace qfs::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using Blocks = std::vector<std::span<double>>;
using ConstBlocks = std::vector<std::span<const double>>;

/// One LSTM direction. Gate rows are stacked input, forget, cell, output.
struct LstmParams {
    MatrixXd w_in;   // 4H x E
    MatrixXd w_rec;  // 4H x H
    VectorXd bias;   // 4H

    static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
    std::size_t input_dim() const { return static_cast<std::size_t>(w_in.cols()); }
    std::size_t hidden_dim() const { return static_cast<std::size_t>(w_rec.cols()); }
    void append_blocks(Blocks& out);
    void append_blocks(ConstBlocks& out) const;
    bool operator==(const LstmParams& other) const;
};

struct BiLstmParams {
    LstmParams fwd;
    LstmParams bwd;

    static BiLstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
    std::size_t output_dim() const { return 2 * fwd.hidden_dim(); }
    bool operator==(const BiLstmParams&) const = default;
};

/// relu(W x + b) -> (dropout) -> sigmoid(w . h + b_out)
struct DenseHead {
    MatrixXd hidden_w;  // hidden x input
    VectorXd hidden_b;  // hidden
    VectorXd out_w;     // hidden
    double out_b = 0.0;

    static DenseHead zeros(std::size_t input_dim, std::size_t hidden_dim);
    std::size_t input_dim() const { return static_cast<std::size_t>(hidden_w.cols()); }
    std::size_t hidden_dim() const { return static_cast<std::size_t>(hidden_w.rows()); }
    void append_blocks(Blocks& out);
    void append_blocks(ConstBlocks& out) const;
    bool operator==(const DenseHead& other) const;
};

constexpr std::size_t kHiddenSize = 50;
constexpr std::size_t kNncLstmSize = 100;

struct NncParams {
    BiLstmParams encoder;
    DenseHead head;  // input = 4H + 1

    static NncParams zeros(std::size_t embed_dim, std::size_t lstm_dim = kNncLstmSize,
                           std::size_t hidden_dim = kHiddenSize);
    /// uniform(-0.05, 0.05) weights, zero biases, forget-gate bias 1.
    static NncParams init(std::size_t embed_dim, std::size_t lstm_dim, std::size_t hidden_dim, Rng& rng);

    std::size_t embed_dim() const { return encoder.fwd.input_dim(); }
    std::size_t lstm_dim() const { return encoder.fwd.hidden_dim(); }
    Blocks blocks();
    ConstBlocks blocks() const;
    bool operator==(const NncParams&) const = default;
};

struct PooledParams {
    DenseHead head;  // input = D + 1

    static PooledParams zeros(std::size_t input_dim, std::size_t hidden_dim = kHiddenSize);
    static PooledParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

    std::size_t input_dim() const { return head.input_dim() - 1; }
    Blocks blocks();
    ConstBlocks blocks() const;
    bool operator==(const PooledParams&) const = default;
};

enum class ModelKind : std::uint8_t { Nnc = 1, Pooled = 2 };

using ModelParams = std::variant<NncParams, PooledParams>;

ModelKind kind_of(const ModelParams& params);
std::string_view to_string(ModelKind kind);
/// "nnc" or "pooled"; throws InvalidArgument.
ModelKind parse_model_kind(std::string_view name);
std::size_t parameter_count(const ModelParams& params);

/// Fill every block with uniform(-scale, scale) draws.
void fill_uniform(Blocks blocks, Rng& rng, double scale);

// Forward computations (dropout off).

/// 1 / (1 + position): bounded in (0, 1].
double position_feature(std::size_t position);
double sigmoid(double z);
/// Probability clamped to [1e-7, 1 - 1e-7] before the log.
double bce_loss(double prob, int label);
constexpr double kProbEpsilon = 1e-7;

/// Mean over time of [forward state ; backward state]. Throws EmptySequence.
VectorXd bilstm_encode(const BiLstmParams& params, const MatrixXd& tokens);
double nnc_forward(const NncParams& params, const MatrixXd& question, const MatrixXd& sentence, double position);
double pooled_forward(const PooledParams& params, const VectorXd& sentence, double position);
/// Throws MaskAllFalse.
double pooled_forward(const PooledParams& params, const embed::ContextEmbeddingRecord& rec, double position);

// Training data.

struct LabeledExample {
    std::string question_id;
    std::vector<std::string> question_tokens;
    std::vector<std::string> sentence_tokens;
    std::string sentence_text;
    std::size_t position = 0;
    int label = 0;
    std::string pair_id;

    bool operator==(const LabeledExample&) const = default;
};

struct NncSample {
    MatrixXd question;
    MatrixXd sentence;
    double position = 1.0;
    int label = 0;
};

struct PooledSample {
    VectorXd sentence;
    double position = 1.0;
    int label = 0;
};

/// Empty token lists become a single OOV row so every sequence has length >= 1.
std::vector<NncSample> make_nnc_samples(std::span<const LabeledExample> examples, const embed::EmbeddingTable& table,
                                        std::size_t clip_len);
/// Throws ScorerInputMissing when an example's pair id has no embedding record.
std::vector<PooledSample> make_pooled_samples(std::span<const LabeledExample> examples,
                                              const embed::PooledFeatures& features);

/// Loss of one sample and its gradient, accumulated into `grad`. A non-null
/// `dropout_mask` multiplies the hidden activations (already scaled).
double nnc_loss_and_grad(const NncParams& params, const NncSample& sample, const VectorXd* dropout_mask,
                         NncParams& grad);
double pooled_loss_and_grad(const PooledParams& params, const PooledSample& sample, const VectorXd* dropout_mask,
                            PooledParams& grad);

// Training.

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 1024;
    double dropout_rate = 0.7;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    /// Dropout-mask stream seed; derived from `seed` when unset.
    std::optional<std::uint64_t> mask_seed;
    std::size_t clip_len = 300;
    std::size_t hidden_dim = kHiddenSize;
    std::size_t lstm_dim = kNncLstmSize;

    /// Word-vector BiLSTM defaults: 10 epochs, batch 1024, dropout 0.7, clip 300.
    static TrainConfig nnc_defaults();
    /// Frozen-encoder defaults: batch 32, clip 250, 8 epochs, dropout 0.8.
    static TrainConfig pooled_defaults();
    /// Throws InvalidArgument.
    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainResult {
    ModelParams params;
    /// Mean training-set loss (dropout off) after each epoch.
    std::vector<double> loss_history;
};

/// Throws EmptyDataset, NonFiniteLoss.
TrainResult train_nnc(std::span<const NncSample> samples, const TrainConfig& config);
TrainResult train_pooled(std::span<const PooledSample> samples, const TrainConfig& config);

/// Either word vectors (NNC) or pooled contextual features (pooled model).
using EmbeddingSource = std::variant<const embed::EmbeddingTable*, const embed::PooledFeatures*>;

TrainResult train(ModelKind kind, std::span<const LabeledExample> examples, const EmbeddingSource& source,
                  const TrainConfig& config);

double accuracy(const PooledParams& params, std::span<const PooledSample> samples);
double accuracy(const NncParams& params, std::span<const NncSample> samples);

// Gradient checking.

struct GradCheckResult {
    double max_error = 0.0;
    std::size_t n_params = 0;
    std::size_t worst_block = 0;
    std::size_t worst_index = 0;
    std::size_t n_step_reduced = 0;  // parameters whose stencil crossed a relu kink
};

/// Five-point central differences over every parameter. Per-parameter error is
/// |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const NncParams& params, const NncSample& sample, double epsilon = 1e-4);
GradCheckResult grad_check(const PooledParams& params, const PooledSample& sample, double epsilon = 1e-4);

// Persistence.

/// "QFSM", u32 version, u8 kind, dims, u64 seed, f64 blocks, u32 CRC32.
void save_params(const std::string& path, const ModelParams& params, std::uint64_t seed);
std::string serialize_params(const ModelParams& params, std::uint64_t seed);

struct LoadedParams {
    ModelParams params;
    std::uint64_t seed = 0;
};

/// Throws MalformedInput; KindMismatch when `expected` disagrees with the file.
LoadedParams load_params(const std::string& path, std::optional<ModelKind> expected = std::nullopt);
LoadedParams deserialize_params(std::string_view bytes, std::optional<ModelKind> expected = std::nullopt);

}  // namespace qfs::nn
