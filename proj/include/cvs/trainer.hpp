#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvs/dataset.hpp"
#include "cvs/nn/adam.hpp"
#include "cvs/surrogate.hpp"

namespace cvs {

struct TrainConfig {
    std::uint32_t epochs = 100;
    std::uint32_t batch_size = 8;
    double learning_rate = 1e-4;
    std::uint64_t seed = 1;
    std::uint32_t checkpoint_every = 0;  ///< epochs between checkpoints; 0 writes only the final one

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct EpochLoss {
    std::uint32_t epoch = 0;  ///< 1-based
    double mse = 0.0;
    double kl = 0.0;  ///< weighted KL contribution, kl_weight * KL / pixels
    double total = 0.0;

    bool operator==(const EpochLoss&) const = default;
};

/// How the training split was drawn, so evaluation can rebuild the test split.
struct SplitInfo {
    std::uint64_t seed = 0;
    double train_fraction = 0.0;
    std::uint64_t dataset_fingerprint = 0;

    bool operator==(const SplitInfo&) const = default;
};

/// Everything needed to continue training or to run inference. The random
/// state is (train.seed, epochs_done): shuffles and latent noise are derived
/// per epoch and batch from the seed.
struct Checkpoint {
    TrainConfig train;
    SurrogateModel model;
    nn::AdamState<float> adam;
    std::uint32_t epochs_done = 0;
    SplitInfo split;
    std::vector<EpochLoss> history;
};

/// Fresh, initialized checkpoint.
Checkpoint make_checkpoint(const CvaeConfig& cvae, const TrainConfig& train, StrainComponent component,
                           const MinMaxScaler& scaler, const SplitInfo& split);

/// Scaled network inputs for one component.
struct TrainData {
    nn::Tensor<float> x;  ///< (N, 1, H, W)
    nn::Tensor<float> t;  ///< (N, k)
};

TrainData make_train_data(const Dataset& data, const MinMaxScaler& scaler, std::size_t component);

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs epochs epochs_done+1 .. train.epochs, one Adam step per mini-batch
/// (the last partial batch included). `on_epoch` is called after every epoch.
/// On a non-finite loss the checkpoint is rolled back to the start of the
/// failing epoch and TrainingDiverged is thrown.
void train(Checkpoint& ck, const TrainData& data, const std::function<void(const Checkpoint&)>& on_epoch = {});

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ck, const std::string& path);
/// Throws io::FormatError on bad magic, unsupported version, truncation or
/// inconsistent shapes.
Checkpoint load_checkpoint(const std::string& path);

/// Header "epoch,mse_term,kl_term,total", one row per epoch.
void write_loss_csv(const std::vector<EpochLoss>& history, const std::string& path);

}  // namespace cvs
