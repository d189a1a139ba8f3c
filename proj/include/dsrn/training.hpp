#pragma once

#include "dsrn/data.hpp"
#include "dsrn/losses.hpp"
#include "dsrn/network.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dsrn {

struct TrainConfig {
    int batch_size = 2;
    int input_size = 512;
    double lr_init = 2e-3;
    double lr_final = 5e-5;
    int steps_stage1 = 2000;
    int steps_stage2 = 2000;
    LossWeights loss_weights;
    std::uint64_t seed = 0;
    int val_every = 100;      // validation interval in steps; the last step is always validated
    double clip_norm = 1.0;   // global gradient norm; <= 0 disables clipping
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

enum class Objective { l2, combined };
const char* to_string(Objective o) noexcept;

/// Cosine decay from lr_init at step 0 to lr_final at `total_steps`.
double lr_at(int step, int total_steps, const TrainConfig& cfg);

/// Everything needed to resume or deploy a model.
struct Checkpoint {
    explicit Checkpoint(Dsrn<float> m) : model(std::move(m)) {}

    Dsrn<float> model;
    TrainConfig config;
    int stage = 1;
    int step = 0;
    double best_val_psnr = 0.0;  // 0 when no validation ran
    std::optional<Task> task;
    std::optional<IlluminationSetting> target;
};

struct LogRecord {
    int step = 0;
    int stage = 1;
    double lr = 0;
    LossTerms loss;
    std::optional<double> val_psnr;
    std::optional<double> train_psnr;

    std::string to_json() const;
};

struct StageOptions {
    std::vector<ScenePair> validation;        // empty: no validation
    std::ostream* log = nullptr;              // JSON lines
    std::function<void(const LogRecord&)> on_record;
    std::optional<std::filesystem::path> best_checkpoint;  // written whenever validation improves
    /// When set, training PSNR over all training pairs is measured at each validation point
    /// and the stage ends once it reaches this value.
    std::optional<double> stop_at_train_psnr;
};

/// Adam state for one model, in parameter visiting order.
class Adam {
public:
    Adam(const Dsrn<float>& model, double beta1, double beta2, double eps);
    /// Applies one update using the gradients stored in `model`.
    void step(Dsrn<float>& model, double lr);
    long steps_taken() const noexcept { return t_; }

private:
    double b1_, b2_, eps_;
    long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

/// Global L2 norm of all parameter gradients.
double grad_norm(const Dsrn<float>& model);
/// Rescales gradients so their global norm is at most `max_norm`; returns the norm before scaling.
double clip_grad_norm(Dsrn<float>& model, double max_norm);

/// Forward + backward on one batch with every stack supervised; gradients are accumulated
/// into `model` (call zero_grad first). Returns the loss terms averaged over the batch.
LossTerms accumulate_batch(Dsrn<float>& model, const std::vector<const ScenePair*>& batch, Objective objective,
                           const LossWeights& weights, const FeatureExtractor<float>& features);

/// Random aligned crop of `size` x `size` from input and target; the pair is returned
/// unchanged when it is not larger than `size`.
ScenePair random_crop(const ScenePair& pair, int size, Rng& rng);

double mean_psnr(const Dsrn<float>& model, const std::vector<ScenePair>& pairs);

/// Optimizes `ckpt.model` for `steps` steps with the given objective and a fresh optimizer.
void train_stage(Checkpoint& ckpt, const std::vector<ScenePair>& pairs, Objective objective, int stage, int steps,
                 const StageOptions& opt = {});

/// Stage 1 with the L2 objective, then stage 2 with the combined objective starting from the
/// stage-1 weights; the learning-rate schedule restarts at each stage.
Checkpoint train_two_stage(Dsrn<float> model, const std::vector<ScenePair>& pairs, const TrainConfig& cfg,
                           const StageOptions& opt = {});

}  // namespace dsrn
