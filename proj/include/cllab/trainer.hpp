#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cllab/corpus.hpp"
#include "cllab/encoder.hpp"
#include "cllab/objectives.hpp"

namespace cllab {

enum class Objective { InfoNce, OffInfo, DclOnly, Bt, Combined };

const char* objective_name(Objective o);
Objective objective_from_name(const std::string& name);

// Noise manipulation applied to one view role (positive-pair or
// negative-pair tensors).
struct NoiseMode {
    enum class Kind { None, PlusNoise, MeanSampled };
    Kind kind = Kind::None;
    double variance = 0.1;  // PlusNoise
    std::size_t k = 10;     // MeanSampled
};

std::string noise_mode_name(const NoiseMode& m);
NoiseMode noise_mode_from_name(const std::string& name);

struct TrainConfig {
    Objective objective = Objective::InfoNce;
    LossConfig loss;
    EncoderConfig encoder;
    double lr = 3e-5;
    std::size_t batch_size = 64;
    std::size_t epochs = 1;
    std::size_t eval_interval = 125;  // update steps between dev evaluations
    std::uint64_t seed = 42;
    bool eval_pre_mlp = true;  // evaluate at the pooling output (MLP removed)
    NoiseMode pos_noise;
    NoiseMode neg_noise;
    std::size_t bt_pad_rows = 0;  // artificial rows added for the bt objective

    void validate() const;
};

struct AdamState {
    // first/second moment accumulators, laid out like ParamGrads
    ParamGrads m;
    ParamGrads v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(const EncoderParams& params);

// One bias-corrected Adam update. Throws std::runtime_error naming the
// parameter block and step index on a non-finite gradient.
void adam_step(EncoderParams& params, const ParamGrads& grads, AdamState& state,
               double lr);

struct EvalPoint {
    std::size_t step = 0;
    double loss = 0.0;       // mean total loss over the interval
    double loss_info = 0.0;  // InfoNCE-family component
    double loss_dcl = 0.0;   // unweighted DCL component
    double dev_spearman = 0.0;
    double alignment = 0.0;
    double uniformity = 0.0;
};

struct TrainReport {
    std::vector<EvalPoint> history;
    std::size_t best_step = 0;
    double best_dev_spearman = 0.0;
    double test_spearman = 0.0;  // evaluated at the best checkpoint
    std::size_t total_steps = 0;
    bool diverged = false;
    std::size_t diverged_step = 0;
};

struct TrainResult {
    TrainReport report;
    EncoderParams best_params;
    EncoderParams final_params;
};

TrainResult train(const TrainConfig& cfg, const std::vector<TokenSequence>& corpus,
                  const std::vector<StsPair>& dev, const std::vector<StsPair>& test);

// Spearman correlation between model cosine similarities (deterministic
// forward; pooling output when eval_pre_mlp) and gold scores.
double evaluate(const EncoderParams& params, std::span<const StsPair> pairs,
                bool eval_pre_mlp);

// Checkpoint file: magic "CLLB1", little-endian u32 length prefix, UTF-8
// JSON metadata (shapes, config echo, seed, step), then the parameter
// tensors in declaration order as little-endian 32-bit reals, row-major.
struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::size_t step = 0;
    std::string config_echo;  // JSON text
};

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path,
                     const CheckpointMeta& meta = {});
EncoderParams load_checkpoint(const std::filesystem::path& path,
                              CheckpointMeta* meta_out = nullptr);

// Metrics history CSV:
// step,loss,loss_info,loss_dcl,dev_spearman,alignment,uniformity
void write_metrics_csv(const std::filesystem::path& path, const TrainReport& report);

std::string train_report_json(const TrainConfig& cfg, const TrainReport& report);

// The config-echo object embedded in reports and checkpoint metadata.
std::string train_config_json_text(const TrainConfig& cfg);

}  // namespace cllab
