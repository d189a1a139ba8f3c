#include "dsrn/training.hpp"

#include "dsrn/checkpoint.hpp"
#include "dsrn/config_io.hpp"
#include "dsrn/log.hpp"
#include "dsrn/metrics.hpp"
#include "dsrn/rng.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace dsrn {

using nlohmann::json;

void TrainConfig::validate() const {
    require(batch_size >= 1, ErrorCode::config, "batch_size must be at least 1");
    require(input_size >= 16 && input_size % 16 == 0, ErrorCode::config, "input_size must be a positive multiple of 16");
    require(lr_final > 0 && lr_init > lr_final, ErrorCode::config, "learning rates must satisfy lr_init > lr_final > 0");
    require(steps_stage1 >= 0 && steps_stage2 >= 0, ErrorCode::config, "stage lengths must be non-negative");
    require(val_every >= 1, ErrorCode::config, "val_every must be at least 1");
    require(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_eps > 0, ErrorCode::config,
            "invalid Adam coefficients");
    loss_weights.validate();
}

const char* to_string(Objective o) noexcept { return o == Objective::l2 ? "l2" : "combined"; }

double lr_at(int step, int total_steps, const TrainConfig& cfg) {
    if (total_steps < 0 || step < 0 || step > total_steps)
        fail(ErrorCode::usage, "lr_at: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
    if (total_steps == 0) return cfg.lr_init;
    const double t = double(step) / double(total_steps);
    return cfg.lr_final + 0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

std::string LogRecord::to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["stage"] = stage;
    j["lr"] = lr;
    j["loss_terms"] = {{"l1", loss.l1},     {"l2", loss.l2}, {"ssim", loss.ssim}, {"perceptual", loss.perceptual},
                       {"tv", loss.tv},     {"total", loss.total}};
    j["val_psnr"] = val_psnr ? json(*val_psnr) : json(nullptr);
    if (train_psnr) j["train_psnr"] = *train_psnr;
    return j.dump();
}

Adam::Adam(const Dsrn<float>& model, double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {
    model.visit(ConstParamVisitor<float>([&](const std::string&, const Parameter<float>& p) {
        m_.emplace_back(p.size(), 0.0f);
        v_.emplace_back(p.size(), 0.0f);
    }));
}

void Adam::step(Dsrn<float>& model, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, double(t_));
    const double c2 = 1.0 - std::pow(b2_, double(t_));
    const float step_size = float(lr / c1);
    const float inv_sqrt_c2 = float(1.0 / std::sqrt(c2));
    const float b1 = float(b1_), b2 = float(b2_), eps = float(eps_);
    std::size_t k = 0;
    model.visit(ParamVisitor<float>([&](const std::string&, Parameter<float>& p) {
        auto& m = m_.at(k);
        auto& v = v_.at(k);
        ++k;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const float g = p.grad[i];
            m[i] = b1 * m[i] + (1.0f - b1) * g;
            v[i] = b2 * v[i] + (1.0f - b2) * g * g;
            p.value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
        }
    }));
}

double grad_norm(const Dsrn<float>& model) {
    double sq = 0;
    model.visit(ConstParamVisitor<float>([&](const std::string&, const Parameter<float>& p) {
        for (float g : p.grad) sq += double(g) * double(g);
    }));
    return std::sqrt(sq);
}

double clip_grad_norm(Dsrn<float>& model, double max_norm) {
    const double norm = grad_norm(model);
    if (max_norm > 0 && norm > max_norm) {
        const float s = float(max_norm / norm);
        model.visit(ParamVisitor<float>([&](const std::string&, Parameter<float>& p) {
            for (float& g : p.grad) g *= s;
        }));
    }
    return norm;
}

LossTerms accumulate_batch(Dsrn<float>& model, const std::vector<const ScenePair*>& batch, Objective objective,
                           const LossWeights& weights, const FeatureExtractor<float>& features) {
    if (batch.empty()) fail(ErrorCode::data, "empty training batch");
    const double scale = 1.0 / double(batch.size());
    LossTerms sum;
    for (const ScenePair* pair : batch) {
        DsrnCache<float> cache;
        const auto outputs = model.forward_stacks(pair->input, &cache);
        std::vector<Tensor<float>> d_out(outputs.size());
        for (std::size_t s = 0; s < outputs.size(); ++s) {
            LossTerms t;
            if (objective == Objective::l2) {
                t.l2 = double(l2_loss(outputs[s], pair->target, &d_out[s]));
                t.total = t.l2;
            } else {
                t = combined_loss_terms(outputs[s], pair->target, weights, features, SsimOptions{}, &d_out[s]);
            }
            for (auto& g : d_out[s].values()) g = float(double(g) * scale);
            sum.l1 += t.l1 * scale;
            sum.l2 += t.l2 * scale;
            sum.ssim += t.ssim * scale;
            sum.perceptual += t.perceptual * scale;
            sum.tv += t.tv * scale;
            sum.total += t.total * scale;
        }
        model.backward(cache, d_out);
    }
    return sum;
}

ScenePair random_crop(const ScenePair& pair, int size, Rng& rng) {
    const int h = pair.input.height(), w = pair.input.width();
    if (h <= size && w <= size) return pair;
    if (h < size || w < size) fail(ErrorCode::data, "image " + pair.input.shape_string() + " smaller than crop size");
    const int y0 = int(rng.below(std::uint64_t(h - size + 1)));
    const int x0 = int(rng.below(std::uint64_t(w - size + 1)));
    auto crop = [&](const Image& img) {
        Image out(size, size, img.channels());
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
        return out;
    };
    ScenePair out;
    out.scene = pair.scene;
    out.input = crop(pair.input);
    out.input_settings = pair.input_settings;
    out.target = crop(pair.target);
    out.target_setting = pair.target_setting;
    return out;
}

double mean_psnr(const Dsrn<float>& model, const std::vector<ScenePair>& pairs) {
    return evaluate_dataset(model, pairs).psnr_db;
}

namespace {

void check_finite(const LossTerms& t, int stage, int step, double lr) {
    if (std::isfinite(t.total)) return;
    nlohmann::ordered_json d;
    d["stage"] = stage;
    d["step"] = step;
    d["lr"] = lr;
    d["loss_terms"] = {{"l1", t.l1}, {"l2", t.l2}, {"ssim", t.ssim}, {"perceptual", t.perceptual}, {"tv", t.tv}};
    std::string dump = d.dump();
    log(LogLevel::error, "non-finite loss: " + dump);
    fail(ErrorCode::numeric, "non-finite training loss " + dump);
}

}  // namespace

void train_stage(Checkpoint& ckpt, const std::vector<ScenePair>& pairs, Objective objective, int stage, int steps,
                 const StageOptions& opt) {
    const TrainConfig& cfg = ckpt.config;
    cfg.validate();
    if (pairs.empty()) fail(ErrorCode::data, "no training pairs");
    if (steps < 0) fail(ErrorCode::config, "negative step count");
    Dsrn<float>& model = ckpt.model;
    for (const auto& p : pairs) {
        if (p.input.height() > cfg.input_size || p.input.width() > cfg.input_size)
            require(cfg.input_size % model.arch().required_divisor() == 0, ErrorCode::config,
                    "input_size is not divisible by the network's required divisor");
        else
            model.check_input(p.input);
    }

    ckpt.stage = stage;
    ckpt.step = 0;
    if (steps == 0) return;

    Adam adam(model, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    const RandomConvExtractor<float> features;
    Rng rng(mix_seed(cfg.seed, 0x7A1000u + std::uint64_t(stage)));
    std::vector<ScenePair> crops;
    std::vector<const ScenePair*> batch;

    for (int step = 0; step < steps; ++step) {
        const double lr = lr_at(step, steps, cfg);
        crops.clear();
        batch.clear();
        for (int b = 0; b < cfg.batch_size; ++b) {
            const ScenePair& p = pairs[rng.below(pairs.size())];
            crops.push_back(random_crop(p, cfg.input_size, rng));
        }
        for (const auto& c : crops) batch.push_back(&c);

        model.zero_grad();
        const LossTerms terms = accumulate_batch(model, batch, objective, cfg.loss_weights, features);
        check_finite(terms, stage, step, lr);
        clip_grad_norm(model, cfg.clip_norm);
        adam.step(model, lr);
        ckpt.step = step + 1;

        LogRecord rec;
        rec.step = step + 1;
        rec.stage = stage;
        rec.lr = lr;
        rec.loss = terms;
        const bool checkpoint_step = (step + 1) % cfg.val_every == 0 || step + 1 == steps;
        bool stop = false;
        if (checkpoint_step && !opt.validation.empty()) {
            rec.val_psnr = mean_psnr(model, opt.validation);
            if (*rec.val_psnr > ckpt.best_val_psnr) {
                ckpt.best_val_psnr = *rec.val_psnr;
                if (opt.best_checkpoint) save_checkpoint(ckpt, *opt.best_checkpoint);
            }
        }
        if (checkpoint_step && opt.stop_at_train_psnr) {
            rec.train_psnr = mean_psnr(model, pairs);
            stop = *rec.train_psnr >= *opt.stop_at_train_psnr;
        }
        if (opt.log) *opt.log << rec.to_json() << '\n' << std::flush;
        if (opt.on_record) opt.on_record(rec);
        if (checkpoint_step)
            log_info("stage " + std::to_string(stage) + " step " + std::to_string(step + 1) + "/" +
                     std::to_string(steps) + " loss " + std::to_string(terms.total) +
                     (rec.val_psnr ? " val_psnr " + std::to_string(*rec.val_psnr) : std::string()));
        if (stop) break;
    }
}

Checkpoint train_two_stage(Dsrn<float> model, const std::vector<ScenePair>& pairs, const TrainConfig& cfg,
                           const StageOptions& opt) {
    cfg.validate();
    Checkpoint ckpt(std::move(model));
    ckpt.config = cfg;
    train_stage(ckpt, pairs, Objective::l2, 1, cfg.steps_stage1, opt);
    if (cfg.steps_stage2 > 0) train_stage(ckpt, pairs, Objective::combined, 2, cfg.steps_stage2, opt);
    return ckpt;
}

}  // namespace dsrn
