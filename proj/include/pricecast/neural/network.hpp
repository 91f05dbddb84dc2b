#pragma once

#include "pricecast/neural/layers.hpp"
#include "pricecast/rng.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace pricecast::neural {

enum class Family { A, B };

const char* family_name(Family family);
Family family_from_name(std::string_view name);

/**
 * @brief Architecture hyper-parameters for both model families.
 *
 * Family A is a stack of `lstm_layers` LSTM layers (each followed by
 * dropout) and a single linear output neuron reading the last hidden
 * state; its window length is fixed at 4. Family B prepends
 * conv -> average pool -> conv and frees the window length; the conv
 * fields are ignored for family A.
 */
struct NetworkSpec {
    Family family = Family::A;
    int lstm_layers = 1;          // l
    int units = 32;               // n_u per LSTM layer
    double dropout = 0.1;         // r
    double alpha = 0.001;         // Adam learning rate
    int filters = 0;              // f, both conv layers (family B)
    int kernel = 0;               // k_s, both conv layers (family B)
    Padding pad1 = Padding::Same;
    Padding pad2 = Padding::Same;
    int window = 4;               // n timesteps
    int inputs = 9;               // d features per timestep
};

void validate_spec(const NetworkSpec& spec);

int pool_output_length(int input_len);

/// Timestep count arriving at the LSTM stack after the family-B front end
/// (or just the window for family A). Non-positive means the shape cannot
/// be built.
int lstm_input_length(const NetworkSpec& spec);

bool shape_feasible(const NetworkSpec& spec);

/// Offsets of each named tensor inside the flat parameter vector, in
/// forward order. Vectors are stored as single columns (cols = 1);
/// matrices are row-major.
struct TensorSlot {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;
};

struct ParamLayout {
    std::vector<TensorSlot> slots;
    Eigen::Index total = 0;
    const TensorSlot& find(const std::string& name) const;
};

ParamLayout make_layout(const NetworkSpec& spec);

/**
 * @brief All weights of a network in one flat vector.
 *
 * Named tensors are row-major views into the vector, which makes the Adam
 * update, gradient accumulation, and serialisation one-liners. A
 * freshly-constructed instance is all zeros; init() draws Glorot-normal
 * weights and sets the LSTM forget-gate bias block to 1.
 */
class NetworkParams {
public:
    NetworkParams() = default;
    explicit NetworkParams(const NetworkSpec& spec);

    static NetworkParams init(const NetworkSpec& spec, Rng& rng);

    const NetworkSpec& spec() const { return spec_; }
    const ParamLayout& layout() const { return layout_; }
    Eigen::VectorXd& flat() { return flat_; }
    const Eigen::VectorXd& flat() const { return flat_; }
    std::size_t count() const { return std::size_t(flat_.size()); }

    Eigen::Map<RowMat> tensor(const std::string& name);
    Eigen::Map<const RowMat> tensor(const std::string& name) const;
    Eigen::Map<Eigen::VectorXd> vec(const std::string& name);
    Eigen::Map<const Eigen::VectorXd> vec(const std::string& name) const;

    void set_zero() { flat_.setZero(); }

private:
    NetworkSpec spec_;
    ParamLayout layout_;
    Eigen::VectorXd flat_;
};

/// Per-sample dropout masks, one per LSTM layer output, drawn up front so
/// a training step (or a gradient check) can replay the exact same masks.
struct DropoutPlan {
    std::vector<Eigen::MatrixXd> masks;
};

DropoutPlan make_dropout_plan(const NetworkSpec& spec, Rng& rng);

/// Everything the backward pass needs from one sample's forward pass.
struct ForwardCache {
    ConvCache conv1;
    ConvCache conv2;
    Eigen::MatrixXd conv1_out;
    Eigen::MatrixXd pool_out;
    std::vector<LstmCache> lstm;
    std::vector<Eigen::MatrixXd> lstm_dropped;     // post-dropout hidden sequences
    double prediction = 0.0;
};

/// Forward pass for one window (rows = timesteps, cols = features).
/// plan == nullptr runs inference (dropout identity).
double forward_one(const NetworkParams& params, const Eigen::MatrixXd& x,
                   const DropoutPlan* plan, ForwardCache* cache = nullptr);

/// Accumulates parameter gradients for d(loss)/d(prediction) = d_pred.
void backward_one(const NetworkParams& params, const ForwardCache& cache,
                  const DropoutPlan* plan, double d_pred, NetworkParams& grads);

/// Batch predictions. In training mode fresh dropout masks are drawn from
/// the rng per sample; in inference mode rng may be null.
Eigen::VectorXd forward(const NetworkParams& params, const std::vector<Eigen::MatrixXd>& batch,
                        bool training, Rng* rng);

/// Mean squared error over the batch plus parameter gradients, using the
/// supplied per-sample dropout plans (pass nullptr for inference-mode
/// gradients). grads must be zeroed by the caller if accumulation is not
/// intended.
double loss_and_grads(const NetworkParams& params, const std::vector<Eigen::MatrixXd>& batch,
                      const Eigen::VectorXd& targets, const std::vector<DropoutPlan>* plans,
                      NetworkParams& grads);

/// Mean squared error of inference-mode predictions against targets.
double evaluate_mse(const NetworkParams& params, const std::vector<Eigen::MatrixXd>& batch,
                    const Eigen::VectorXd& targets);

/**
 * @brief Versioned flat binary weight file.
 *
 * Layout: magic "PCNN", u32 version, u64 JSON header length, the JSON
 * header (architecture, tensor table, stopped_epoch), then the flat
 * parameter vector as raw little-endian 64-bit doubles in layout order.
 */
void save_network(const std::filesystem::path& path, const NetworkParams& params,
                  int stopped_epoch);

struct LoadedNetwork {
    NetworkParams params;
    int stopped_epoch = 0;
};

LoadedNetwork load_network(const std::filesystem::path& path);

}
