#pragma once

#include <vector>

#include "qfs/neural.hpp"

namespace qfs::nn::detail {

struct LstmGates {
    VectorXd i, f, g, o;
};

/// States indexed by processing step; h[0], c[0] are the zero initial state.
struct LstmTrace {
    bool reverse = false;
    std::vector<VectorXd> h;
    std::vector<VectorXd> c;
    std::vector<LstmGates> gates;
};

struct BiLstmTrace {
    LstmTrace fwd;
    LstmTrace bwd;
    VectorXd output;
};

struct HeadTrace {
    VectorXd x;
    VectorXd pre;
    VectorXd act;  // after relu and dropout
    double prob = 0.5;
};

LstmTrace lstm_run(const LstmParams& p, const MatrixXd& inputs, bool reverse);
/// `dh_each` is the external gradient reaching every step's hidden state.
void lstm_backprop(const LstmParams& p, const MatrixXd& inputs, const LstmTrace& tr, const VectorXd& dh_each,
                   LstmParams& grad);
BiLstmTrace bilstm_run(const BiLstmParams& p, const MatrixXd& tokens);
void bilstm_backprop(const BiLstmParams& p, const MatrixXd& tokens, const BiLstmTrace& tr, const VectorXd& d_output,
                     BiLstmParams& grad);
HeadTrace head_run(const DenseHead& head, const VectorXd& x, const VectorXd* dropout_mask);
/// Returns d loss / d x.
VectorXd head_backprop(const DenseHead& head, const HeadTrace& tr, int label, const VectorXd* dropout_mask,
                       DenseHead& grad);
VectorXd nnc_features(const VectorXd& question, const VectorXd& sentence, double position);
VectorXd pooled_features(const VectorXd& sentence, double position);

}  // namespace qfs::nn::detail
