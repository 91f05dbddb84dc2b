#pragma once

#include "pricecast/rng.hpp"

#include <Eigen/Dense>

namespace pricecast::neural {

/// Weight tensors live in row-major storage so that views into the flat
/// parameter vector serialise in row-major order without copies.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Padding { None, Same, Causal };

const char* padding_name(Padding pad);
Padding padding_from_name(std::string_view name);

/// Glorot (normal) initialisation: shape (fan_out, fan_in), i.i.d. draws
/// with variance 2 / (fan_in + fan_out), filled row by row.
RowMat glorot_normal(int fan_in, int fan_out, Rng& rng);

/// Dense layer y = W x + b.
Eigen::VectorXd dense_forward(Eigen::Ref<const RowMat> w, Eigen::Ref<const Eigen::VectorXd> b,
                              const Eigen::VectorXd& x);

/// Accumulates weight gradients (+=) and returns the input gradient.
Eigen::VectorXd dense_backward(Eigen::Ref<const RowMat> w, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& dy, Eigen::Ref<RowMat> gw,
                               Eigen::Ref<Eigen::VectorXd> gb);

/// Timestep-by-timestep intermediates kept for backprop through time.
/// Rows are timesteps. Gate order inside the stacked weight matrices is
/// input, forget, cell candidate, output.
struct LstmCache {
    Eigen::MatrixXd input;      // T x d
    Eigen::MatrixXd gate_i;     // T x u, sigmoid
    Eigen::MatrixXd gate_f;
    Eigen::MatrixXd gate_g;     // tanh candidate
    Eigen::MatrixXd gate_o;
    Eigen::MatrixXd cell;       // c_t
    Eigen::MatrixXd cell_tanh;  // tanh(c_t)
    Eigen::MatrixXd hidden;     // h_t
};

/**
 * @brief LSTM over a sequence, initial hidden and cell state zero.
 *
 * wx stacks the four gate blocks on rows (4u x d), wh likewise against the
 * recurrent state (4u x u), bias has length 4u. Returns the full hidden
 * sequence (T x u); pass a cache to keep what the backward pass needs.
 */
Eigen::MatrixXd lstm_forward(Eigen::Ref<const RowMat> wx, Eigen::Ref<const RowMat> wh,
                             Eigen::Ref<const Eigen::VectorXd> b, const Eigen::MatrixXd& seq,
                             LstmCache* cache = nullptr);

/// Backprop through time. d_hidden holds the loss gradient of every hidden
/// output row (zero rows for unused timesteps). Weight gradients
/// accumulate; the return value is the gradient of the input sequence.
Eigen::MatrixXd lstm_backward(Eigen::Ref<const RowMat> wx, Eigen::Ref<const RowMat> wh,
                              const LstmCache& cache, const Eigen::MatrixXd& d_hidden,
                              Eigen::Ref<RowMat> gwx, Eigen::Ref<RowMat> gwh,
                              Eigen::Ref<Eigen::VectorXd> gb);

/// Output length of a 1-D convolution. Same and causal preserve the input
/// length; none gives T - k + 1, which may be non-positive for short
/// inputs (callers treat that as an infeasible shape).
int conv_output_length(int input_len, int kernel, Padding pad);

struct ConvCache {
    Eigen::MatrixXd padded;     // zero-padded input
    Eigen::MatrixXd pre;        // pre-activation, T' x f
    int pad_left = 0;
    int input_len = 0;
};

/**
 * @brief 1-D convolution (cross-correlation) along time with ReLU.
 *
 * Filters sit on the rows of w, one flattened receptive field per row with
 * the time offset major and the input channel minor: w(j, u*d + c). Same
 * padding splits the k-1 zeros Keras-style (extra zero on the right);
 * causal puts all of them on the left.
 */
Eigen::MatrixXd conv1d_forward(Eigen::Ref<const RowMat> w, Eigen::Ref<const Eigen::VectorXd> b,
                               const Eigen::MatrixXd& seq, int kernel, Padding pad,
                               ConvCache* cache = nullptr);

Eigen::MatrixXd conv1d_backward(Eigen::Ref<const RowMat> w, const ConvCache& cache,
                                const Eigen::MatrixXd& d_out, int kernel,
                                Eigen::Ref<RowMat> gw, Eigen::Ref<Eigen::VectorXd> gb);

/// Non-overlapping mean over pairs of timesteps; an odd trailing row is
/// dropped. Input must have at least two rows.
Eigen::MatrixXd avgpool1d_forward(const Eigen::MatrixXd& seq);

Eigen::MatrixXd avgpool1d_backward(int input_len, const Eigen::MatrixXd& d_out);

/// Inverted-dropout mask: entries are 0 with probability r and 1/(1-r)
/// otherwise, drawn row by row.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double r, Rng& rng);

/// Training mode multiplies by a freshly drawn mask; inference is the
/// identity regardless of r.
Eigen::MatrixXd dropout_forward(const Eigen::MatrixXd& x, double r, bool training, Rng& rng);

}
