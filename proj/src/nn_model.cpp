#include <algorithm>
#include <cmath>
#include <limits>

#include "nn_internal.hpp"
#include "qfs/error.hpp"
#include "qfs/neural.hpp"

namespace qfs::nn {

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

VectorXd sigmoid_vec(const VectorXd& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

}  // namespace

double position_feature(std::size_t position) { return 1.0 / (1.0 + static_cast<double>(position)); }

double sigmoid(double z)
{
    double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    // Keep outputs strictly inside (0, 1) even when the exponential saturates.
    return std::clamp(p, std::numeric_limits<double>::denorm_min(), 1.0 - 0x1p-53);
}

double bce_loss(double prob, int label)
{
    const double p = std::clamp(prob, kProbEpsilon, 1.0 - kProbEpsilon);
    return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

namespace detail {

LstmTrace lstm_run(const LstmParams& p, const MatrixXd& inputs, bool reverse)
{
    const auto n = static_cast<std::size_t>(inputs.rows());
    const auto h = idx(p.hidden_dim());
    LstmTrace tr;
    tr.reverse = reverse;
    tr.h.assign(n + 1, VectorXd::Zero(h));
    tr.c.assign(n + 1, VectorXd::Zero(h));
    tr.gates.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        const auto t = idx(reverse ? n - 1 - s : s);
        VectorXd z = p.w_in * inputs.row(t).transpose() + p.w_rec * tr.h[s] + p.bias;
        LstmGates g;
        g.i = sigmoid_vec(z.segment(0, h));
        g.f = sigmoid_vec(z.segment(h, h));
        g.g = z.segment(2 * h, h).array().tanh().matrix();
        g.o = sigmoid_vec(z.segment(3 * h, h));
        tr.c[s + 1] = g.f.cwiseProduct(tr.c[s]) + g.i.cwiseProduct(g.g);
        tr.h[s + 1] = g.o.cwiseProduct(tr.c[s + 1].array().tanh().matrix());
        tr.gates[s] = std::move(g);
    }
    return tr;
}

void lstm_backprop(const LstmParams& p, const MatrixXd& inputs, const LstmTrace& tr, const VectorXd& dh_each,
                   LstmParams& grad)
{
    const auto n = tr.gates.size();
    const auto h = idx(p.hidden_dim());
    VectorXd dh_next = VectorXd::Zero(h);
    VectorXd dc_next = VectorXd::Zero(h);
    VectorXd dz(4 * h);
    for (std::size_t s = n; s-- > 0;) {
        const auto t = idx(tr.reverse ? n - 1 - s : s);
        const auto& g = tr.gates[s];
        const VectorXd tanh_c = tr.c[s + 1].array().tanh().matrix();
        const VectorXd dh = dh_each + dh_next;
        const VectorXd d_o = dh.cwiseProduct(tanh_c);
        const VectorXd dc =
            dh.cwiseProduct(g.o).cwiseProduct((1.0 - tanh_c.array().square()).matrix()) + dc_next;
        const VectorXd d_i = dc.cwiseProduct(g.g);
        const VectorXd d_g = dc.cwiseProduct(g.i);
        const VectorXd d_f = dc.cwiseProduct(tr.c[s]);
        dc_next = dc.cwiseProduct(g.f);
        dz.segment(0, h) = (d_i.array() * g.i.array() * (1.0 - g.i.array())).matrix();
        dz.segment(h, h) = (d_f.array() * g.f.array() * (1.0 - g.f.array())).matrix();
        dz.segment(2 * h, h) = (d_g.array() * (1.0 - g.g.array().square())).matrix();
        dz.segment(3 * h, h) = (d_o.array() * g.o.array() * (1.0 - g.o.array())).matrix();
        grad.w_in.noalias() += dz * inputs.row(t);
        grad.w_rec.noalias() += dz * tr.h[s].transpose();
        grad.bias += dz;
        dh_next.noalias() = p.w_rec.transpose() * dz;
    }
}

BiLstmTrace bilstm_run(const BiLstmParams& p, const MatrixXd& tokens)
{
    if (tokens.rows() == 0) {
        throw Error(ErrorCode::EmptySequence, "cannot encode an empty token sequence");
    }
    BiLstmTrace tr{lstm_run(p.fwd, tokens, false), lstm_run(p.bwd, tokens, true), VectorXd()};
    const auto n = static_cast<std::size_t>(tokens.rows());
    const auto h = idx(p.fwd.hidden_dim());
    tr.output = VectorXd::Zero(2 * h);
    for (std::size_t s = 1; s <= n; ++s) {
        tr.output.segment(0, h) += tr.fwd.h[s];
        tr.output.segment(h, h) += tr.bwd.h[s];
    }
    tr.output /= static_cast<double>(n);
    return tr;
}

void bilstm_backprop(const BiLstmParams& p, const MatrixXd& tokens, const BiLstmTrace& tr, const VectorXd& d_output,
                     BiLstmParams& grad)
{
    const auto h = idx(p.fwd.hidden_dim());
    const double inv_n = 1.0 / static_cast<double>(tokens.rows());
    // The mean spreads the output gradient evenly over every time step.
    lstm_backprop(p.fwd, tokens, tr.fwd, d_output.segment(0, h) * inv_n, grad.fwd);
    lstm_backprop(p.bwd, tokens, tr.bwd, d_output.segment(h, h) * inv_n, grad.bwd);
}

HeadTrace head_run(const DenseHead& head, const VectorXd& x, const VectorXd* dropout_mask)
{
    HeadTrace tr;
    tr.x = x;
    tr.pre = head.hidden_w * x + head.hidden_b;
    tr.act = tr.pre.cwiseMax(0.0);
    if (dropout_mask != nullptr) {
        tr.act = tr.act.cwiseProduct(*dropout_mask);
    }
    tr.prob = sigmoid(head.out_w.dot(tr.act) + head.out_b);
    return tr;
}

VectorXd head_backprop(const DenseHead& head, const HeadTrace& tr, int label, const VectorXd* dropout_mask,
                       DenseHead& grad)
{
    // d BCE / d logit is p - y, except where the probability clamp is active.
    double d_logit = tr.prob - static_cast<double>(label);
    if (tr.prob < kProbEpsilon || tr.prob > 1.0 - kProbEpsilon) {
        d_logit = 0.0;
    }
    grad.out_w += d_logit * tr.act;
    grad.out_b += d_logit;
    VectorXd d_act = d_logit * head.out_w;
    if (dropout_mask != nullptr) {
        d_act = d_act.cwiseProduct(*dropout_mask);
    }
    const VectorXd d_pre = (tr.pre.array() > 0.0).select(d_act.array(), 0.0).matrix();
    grad.hidden_w.noalias() += d_pre * tr.x.transpose();
    grad.hidden_b += d_pre;
    return head.hidden_w.transpose() * d_pre;
}

VectorXd nnc_features(const VectorXd& question, const VectorXd& sentence, double position)
{
    const auto d = sentence.size();
    VectorXd x(2 * d + 1);
    x.segment(0, d) = sentence;
    x.segment(d, d) = sentence.cwiseProduct(question);
    x[2 * d] = position;
    return x;
}

VectorXd pooled_features(const VectorXd& sentence, double position)
{
    VectorXd x(sentence.size() + 1);
    x.head(sentence.size()) = sentence;
    x[sentence.size()] = position;
    return x;
}

}  // namespace detail

VectorXd bilstm_encode(const BiLstmParams& params, const MatrixXd& tokens)
{
    return detail::bilstm_run(params, tokens).output;
}

double nnc_forward(const NncParams& params, const MatrixXd& question, const MatrixXd& sentence, double position)
{
    auto q = bilstm_encode(params.encoder, question);
    auto s = bilstm_encode(params.encoder, sentence);
    return detail::head_run(params.head, detail::nnc_features(q, s, position), nullptr).prob;
}

double pooled_forward(const PooledParams& params, const VectorXd& sentence, double position)
{
    if (static_cast<std::size_t>(sentence.size()) != params.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "pooled classifier expects " + std::to_string(params.input_dim())
                                                      + " inputs, got " + std::to_string(sentence.size()));
    }
    return detail::head_run(params.head, detail::pooled_features(sentence, position), nullptr).prob;
}

double pooled_forward(const PooledParams& params, const embed::ContextEmbeddingRecord& rec, double position)
{
    return pooled_forward(params, embed::mean_pool(rec), position);
}

double nnc_loss_and_grad(const NncParams& params, const NncSample& sample, const VectorXd* dropout_mask,
                         NncParams& grad)
{
    auto tq = detail::bilstm_run(params.encoder, sample.question);
    auto ts = detail::bilstm_run(params.encoder, sample.sentence);
    auto th = detail::head_run(params.head, detail::nnc_features(tq.output, ts.output, sample.position), dropout_mask);
    const double loss = bce_loss(th.prob, sample.label);

    VectorXd dx = detail::head_backprop(params.head, th, sample.label, dropout_mask, grad.head);
    const auto d = tq.output.size();
    VectorXd d_inter = dx.segment(d, d);
    VectorXd d_sentence = dx.segment(0, d) + d_inter.cwiseProduct(tq.output);
    VectorXd d_question = d_inter.cwiseProduct(ts.output);
    detail::bilstm_backprop(params.encoder, sample.sentence, ts, d_sentence, grad.encoder);
    detail::bilstm_backprop(params.encoder, sample.question, tq, d_question, grad.encoder);
    return loss;
}

double pooled_loss_and_grad(const PooledParams& params, const PooledSample& sample, const VectorXd* dropout_mask,
                            PooledParams& grad)
{
    auto th = detail::head_run(params.head, detail::pooled_features(sample.sentence, sample.position), dropout_mask);
    detail::head_backprop(params.head, th, sample.label, dropout_mask, grad.head);
    return bce_loss(th.prob, sample.label);
}

}  // namespace qfs::nn
