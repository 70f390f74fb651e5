#include "cardiosynth/train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cardiosynth/core/error.hpp"
#include "cardiosynth/core/log.hpp"
#include "cardiosynth/core/nifti.hpp"
#include "cardiosynth/losses/losses.hpp"
#include "cardiosynth/nn/ops.hpp"
#include "cardiosynth/preprocess/preprocess.hpp"

namespace cardiosynth::train {

using nn::Shape;
using nn::Tensor;

TrainState initial_state(double lr, std::uint64_t seed) {
  TrainState s;
  s.lr = lr;
  s.rng_state = seed;
  return s;
}

TrainState plateau_step(TrainState s, double epoch_loss, const SegTrainConfig& cfg) {
  if (!s.ema_started) {
    s.ema_loss = epoch_loss;
    s.ema_started = true;
    s.best_window_ema = epoch_loss;
    s.epochs_since_improvement = 0;
    return s;
  }
  s.ema_loss = cfg.ema_decay * s.ema_loss + (1.0 - cfg.ema_decay) * epoch_loss;
  if (s.ema_loss < s.best_window_ema * (1.0 - cfg.plateau_rel_threshold)) {
    s.best_window_ema = s.ema_loss;
    s.epochs_since_improvement = 0;
  } else if (++s.epochs_since_improvement >= cfg.plateau_window_epochs) {
    s.lr *= cfg.lr_plateau_factor;
    s.epochs_since_improvement = 0;
    s.best_window_ema = s.ema_loss;
  }
  return s;
}

bool should_stop(const TrainState& s, const SegTrainConfig& cfg) {
  return s.lr < cfg.min_lr || s.epoch >= cfg.max_epochs;
}

Json to_json(const EpochRecord& r, bool with_wall_time) {
  Json j{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"lr", r.lr}, {"losses", r.breakdown}};
  if (with_wall_time) j["wall_time"] = r.wall_time;
  return j;
}

Json history_json(const std::vector<EpochRecord>& h, bool with_wall_time) {
  Json a = Json::array();
  for (const auto& r : h) a.push_back(to_json(r, with_wall_time));
  return a;
}

std::vector<std::size_t> epoch_order(const std::vector<Sample>& data, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> groups;
  for (const auto& s : data) groups.push_back(s.group);
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  std::vector<std::vector<std::size_t>> members(groups.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto g = std::lower_bound(groups.begin(), groups.end(), data[i].group) - groups.begin();
    members[static_cast<std::size_t>(g)].push_back(i);
  }
  auto shuffle = [&rng](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next_u64() % i]);
  };
  for (auto& m : members) shuffle(m);
  shuffle(members);
  std::vector<std::size_t> order;
  for (std::size_t round = 0; order.size() < data.size(); ++round)
    for (const auto& m : members)
      if (round < m.size()) order.push_back(m[round]);
  return order;
}

Tensor onehot_batch(const std::vector<const augment::SlicePair*>& batch, int classes) {
  const int h = batch.front()->rows, w = batch.front()->cols;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<float> v(batch.size() * classes * plane, 0.0f);
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t i = 0; i < plane; ++i) {
      const int c = batch[b]->labels[i];
      if (c >= classes) throw ValueError("label id " + std::to_string(c) + " exceeds " + std::to_string(classes) + " classes");
      v[(b * classes + c) * plane + i] = 1.0f;
    }
  return Tensor::from(Shape{static_cast<int>(batch.size()), classes, h, w}, std::move(v));
}

Tensor image_batch(const std::vector<const augment::SlicePair*>& batch) {
  const int h = batch.front()->rows, w = batch.front()->cols;
  std::vector<float> v;
  v.reserve(batch.size() * h * w);
  for (const auto* p : batch) {
    if (p->rows != h || p->cols != w) throw ShapeError("batch slices differ in size");
    v.insert(v.end(), p->image.begin(), p->image.end());
  }
  return Tensor::from(Shape{static_cast<int>(batch.size()), 1, h, w}, std::move(v));
}

namespace {

class JsonlLog {
 public:
  explicit JsonlLog(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error("cannot open training log " + path);
  }
  void write(const EpochRecord& r) {
    if (!out_.is_open()) return;
    out_ << to_json(r, true).dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

void check_samples(const std::vector<Sample>& data, int size, int classes, const char* what) {
  if (data.empty()) throw ConfigError(std::string(what) + ": no training slices");
  for (const auto& s : data) {
    if (s.pair.rows != size || s.pair.cols != size)
      throw ShapeError(std::string(what) + ": slice is " + std::to_string(s.pair.rows) + "x" +
                       std::to_string(s.pair.cols) + ", configuration expects " + std::to_string(size));
    if (!s.pair.has_labels()) throw ConfigError(std::string(what) + ": slice without labels");
    for (auto l : s.pair.labels)
      if (l >= classes) throw ValueError(std::string(what) + ": label id out of range");
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<augment::SlicePair> augment_batch(const std::vector<Sample>& data, const std::vector<std::size_t>& idx,
                                              const std::vector<AugmentOp>& ops, const AugmentConfig& aug,
                                              std::uint64_t draw_base) {
  std::vector<augment::SlicePair> out;
  out.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (ops.empty())
      out.push_back(data[idx[i]].pair);
    else
      out.push_back(augment::apply_pipeline(ops, data[idx[i]].pair, aug, derive_seed(draw_base, idx[i])));
  }
  return out;
}

std::vector<const augment::SlicePair*> pointers(const std::vector<augment::SlicePair>& v) {
  std::vector<const augment::SlicePair*> p;
  for (const auto& x : v) p.push_back(&x);
  return p;
}

std::vector<Sample> slices_of(const Volume& img, const LabelMap& lab, int group) {
  std::vector<Sample> out;
  const Shape3 s = img.shape();
  for (int k = 0; k < s.slices; ++k) {
    Sample smp;
    smp.group = group;
    smp.pair.rows = s.rows;
    smp.pair.cols = s.cols;
    smp.pair.pixel_mm = img.spacing.row_mm;
    smp.pair.image.assign(img.voxels.slice(k).begin(), img.voxels.slice(k).end());
    smp.pair.labels.assign(lab.labels.slice(k).begin(), lab.labels.slice(k).end());
    out.push_back(std::move(smp));
  }
  return out;
}

std::pair<Volume, LabelMap> load_pair(const DatasetManifest& m, const ManifestEntry& e, int size) {
  if (!e.labelmap_path) throw ConfigError("labeled role missing labels: " + e.volume_path);
  Volume v = nifti::read_volume(m.resolve(e.volume_path));
  LabelMap l = nifti::read_labels(m.resolve(*e.labelmap_path), e.scheme);
  if (!(v.shape() == l.shape())) throw ShapeError("image and labels differ in shape: " + e.volume_path);
  if (v.shape().rows != size || v.shape().cols != size)
    throw ShapeError(e.volume_path + " is " + std::to_string(v.shape().rows) + "x" + std::to_string(v.shape().cols) +
                     "; run `preprocess` to bring it to " + std::to_string(size) + "x" + std::to_string(size));
  const auto [lo, hi] = std::minmax_element(v.voxels.values().begin(), v.voxels.values().end());
  if (*lo < -1.0 || *hi > 1.0) v = preprocess::normalize_minmax(v);
  return {std::move(v), std::move(l)};
}

}  // namespace

std::vector<Sample> load_segmentation_samples(const DatasetManifest& data, const SegTrainConfig& cfg) {
  const Role role = cfg.network_kind == NetworkKind::net1 ? Role::train_net1 : Role::train_net3;
  const auto entries = data.with_role(role);
  if (entries.empty()) throw ConfigError("manifest has no entries with role " + std::string(to_string(role)));
  std::vector<Sample> out;
  int group = 0;
  for (const auto& e : entries) {
    auto [v, l] = load_pair(data, e, cfg.input_size);
    if (cfg.network_kind == NetworkKind::net1 && l.scheme != SchemeKind::EightClass)
      throw ConfigError("net1 training needs EightClass labels: " + e.volume_path);
    if (cfg.network_kind == NetworkKind::net3 && l.scheme == SchemeKind::EightClass) l = preprocess::to_four_class(l);
    auto s = slices_of(v, l, group++);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

SegTrainResult train_segmentation(const SegTrainConfig& cfg, const DatasetManifest& data, const AugmentConfig& aug,
                                  const TrainOptions& opts) {
  SegTrainConfig c = cfg;
  c.augment = aug;
  c.validate();
  return train_segmentation(c, load_segmentation_samples(data, c), opts);
}

SegTrainResult train_segmentation(const SegTrainConfig& cfg, const std::vector<Sample>& data,
                                  const TrainOptions& opts) {
  cfg.validate();
  const int classes = cfg.num_classes();
  check_samples(data, cfg.input_size, classes, "train_segmentation");
  auto model = nets::build_unet(cfg.unet_spec(), derive_seed(cfg.seed, 1));
  nn::Adam opt(model->params().tensors(),
               {cfg.initial_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay});
  const auto ops = augment::build_pipeline(
      cfg.network_kind == NetworkKind::net1 ? augment::PipelineKind::net1 : augment::PipelineKind::net3, cfg.augment);
  TrainState st = initial_state(cfg.initial_lr, cfg.seed);
  JsonlLog log(opts.log_path);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  while (!should_stop(st, cfg)) {
    const int epoch = st.epoch + 1;
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = epoch_order(data, derive_seed(cfg.seed, 2, epoch));
    double sum_total = 0.0, sum_ce = 0.0, sum_dice = 0.0;
    opt.set_lr(st.lr);
    for (std::size_t start = 0, batch = 0; start < order.size(); start += bs, ++batch) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
      const auto pairs = augment_batch(data, idx, ops, cfg.augment, derive_seed(cfg.seed, 3, epoch));
      const auto ptrs = pointers(pairs);
      std::vector<std::uint8_t> target;
      for (const auto* p : ptrs) target.insert(target.end(), p->labels.begin(), p->labels.end());
      Rng drop(derive_seed(cfg.seed, 4, epoch, batch));
      Tensor logits = model->forward(image_batch(ptrs), true, &drop);
      auto loss = losses::ce_dice(logits, target);
      const double total = loss.ce + loss.dice_loss;
      if (!std::isfinite(total))
        throw TrainingDiverged("non-finite segmentation loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch));
      loss.total.backward();
      opt.step();
      opt.zero_grad();
      const double n = static_cast<double>(idx.size());
      sum_total += total * n;
      sum_ce += loss.ce * n;
      sum_dice += loss.dice_loss * n;
    }
    const double n = static_cast<double>(order.size());
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sum_total / n;
    rec.lr = st.lr;
    rec.breakdown = {{"ce", sum_ce / n}, {"dice", sum_dice / n}};
    if (opts.epoch_loss_hook) rec.train_loss = opts.epoch_loss_hook(epoch, rec.train_loss);
    if (!std::isfinite(rec.train_loss)) throw TrainingDiverged("non-finite epoch loss at epoch " + std::to_string(epoch));
    rec.wall_time = seconds_since(t0);
    st.epoch = epoch;
    if (cfg.network_kind == NetworkKind::net3) st = plateau_step(std::move(st), rec.train_loss, cfg);
    st.history.push_back(rec);
    log.write(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
  }
  SegTrainResult r;
  r.checkpoint = Checkpoint::make(std::string(to_string(cfg.network_kind)), model->params().serialize(), to_json(cfg),
                                  st.epoch, history_json(st.history));
  r.state = std::move(st);
  r.model = std::move(model);
  return r;
}

std::unique_ptr<nets::UNet> load_unet(const Checkpoint& ckpt) {
  if (ckpt.network_kind != "net1" && ckpt.network_kind != "net3")
    throw FormatError("checkpoint holds '" + ckpt.network_kind + "', expected a segmentation network");
  const SegTrainConfig cfg = seg_config_from_json(ckpt.config());
  auto model = nets::build_unet(cfg.unet_spec(), derive_seed(cfg.seed, 1));
  model->params().load(ckpt.blob);
  return model;
}

GanModels build_gan(const GanTrainConfig& cfg) {
  GanModels m;
  m.generator = std::make_unique<nets::SpadeGenerator>(cfg.generator_spec(), cfg.input_size, derive_seed(cfg.seed, 11));
  m.encoder = std::make_unique<nets::StyleEncoder>(cfg.encoder_spec(), cfg.input_size, derive_seed(cfg.seed, 12));
  m.discriminator = std::make_unique<nets::Discriminator>(cfg.discriminator_spec(), derive_seed(cfg.seed, 13));
  return m;
}

std::vector<Sample> load_gan_samples(const DatasetManifest& data, const GanTrainConfig& cfg) {
  const auto entries = data.with_role(Role::train_gan);
  if (entries.empty()) throw ConfigError("manifest has no entries with role train_gan");
  std::vector<Sample> out;
  int group = 0;
  for (const auto& e : entries) {
    auto [v, l] = load_pair(data, e, cfg.input_size);
    if (cfg.conditioning == Conditioning::eight_class && l.scheme != SchemeKind::EightClass)
      throw ConfigError("eight_class conditioning needs EightClass labels: " + e.volume_path);
    if (cfg.conditioning == Conditioning::four_class && l.scheme == SchemeKind::EightClass)
      l = preprocess::to_four_class(l);
    auto s = slices_of(v, l, group++);
    out.insert(out.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  return out;
}

GanTrainResult train_gan(const GanTrainConfig& cfg, const DatasetManifest& data, const AugmentConfig& aug,
                         const TrainOptions& opts) {
  GanTrainConfig c = cfg;
  c.augment = aug;
  c.validate();
  return train_gan(c, load_gan_samples(data, c), opts);
}

GanTrainResult train_gan(const GanTrainConfig& cfg, const std::vector<Sample>& data, const TrainOptions& opts) {
  cfg.validate();
  const int classes = cfg.label_channels();
  check_samples(data, cfg.input_size, classes, "train_gan");
  GanModels m = build_gan(cfg);
  const nn::AdamOptions ao{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, 0.0};
  std::vector<Tensor> ge = m.generator->params().tensors();
  for (const auto& t : m.encoder->params().tensors()) ge.push_back(t);
  nn::Adam opt_g(ge, ao);
  nn::Adam opt_d(m.discriminator->params().tensors(), ao);
  const auto ops = augment::build_pipeline(augment::PipelineKind::gan, cfg.augment);
  TrainState st = initial_state(cfg.lr, cfg.seed);
  JsonlLog log(opts.log_path);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  while (st.epoch < cfg.epochs) {
    const int epoch = st.epoch + 1;
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = epoch_order(data, derive_seed(cfg.seed, 2, epoch));
    double s_g = 0, s_adv = 0, s_fm = 0, s_kl = 0, s_d = 0;
    std::size_t nb = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++nb) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + bs)));
      const auto pairs = augment_batch(data, idx, ops, cfg.augment, derive_seed(cfg.seed, 3, epoch));
      const auto ptrs = pointers(pairs);
      const Tensor onehot = onehot_batch(ptrs, classes);
      const Tensor real = image_batch(ptrs);

      Rng eps(derive_seed(cfg.seed, 5, epoch, nb));
      nets::StyleCode code = m.encoder->encode(real, &eps);
      Tensor fake = m.generator->forward(onehot, code.z, true);
      nets::DiscOutput d_real;
      {
        nn::NoGradGuard ng;
        d_real = m.discriminator->forward(real, onehot);
      }
      nets::DiscOutput d_fake = m.discriminator->forward(fake, onehot);
      Tensor adv = losses::hinge_g(d_fake.logits);
      Tensor fm = losses::feature_matching(d_real.features, d_fake.features, cfg.feature_matching_weight);
      Tensor kl = losses::kl_divergence(code.mu, code.logvar);
      const double g_total = static_cast<double>(adv.item()) + fm.item() + cfg.kl_weight * kl.item();
      if (!std::isfinite(g_total))
        throw TrainingDiverged("non-finite generator loss at epoch " + std::to_string(epoch));
      nn::sum_scalars({adv, fm, nn::scale(kl, static_cast<float>(cfg.kl_weight))}).backward();
      opt_g.step();
      opt_g.zero_grad();
      opt_d.zero_grad();

      const Tensor fake_d = fake.detach();
      nets::DiscOutput dr = m.discriminator->forward(real, onehot);
      nets::DiscOutput df = m.discriminator->forward(fake_d, onehot);
      Tensor dloss = losses::hinge_d(dr.logits, df.logits);
      if (!std::isfinite(dloss.item()))
        throw TrainingDiverged("non-finite discriminator loss at epoch " + std::to_string(epoch));
      dloss.backward();
      opt_d.step();
      opt_d.zero_grad();

      s_g += g_total;
      s_adv += adv.item();
      s_fm += fm.item();
      s_kl += kl.item();
      s_d += dloss.item();
    }
    const double n = static_cast<double>(nb);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = s_g / n;
    rec.lr = st.lr;
    rec.breakdown = {{"g_total", s_g / n},   {"hinge_g", s_adv / n}, {"feature_matching", s_fm / n},
                     {"kl", s_kl / n},       {"kl_weight", cfg.kl_weight}, {"d_total", s_d / n}};
    if (opts.epoch_loss_hook) rec.train_loss = opts.epoch_loss_hook(epoch, rec.train_loss);
    if (!std::isfinite(rec.train_loss)) throw TrainingDiverged("non-finite epoch loss at epoch " + std::to_string(epoch));
    rec.wall_time = seconds_since(t0);
    st.epoch = epoch;
    st.history.push_back(rec);
    log.write(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
  }
  GanTrainResult r;
  const Json cj = to_json(cfg);
  const Json h = history_json(st.history);
  r.generator = Checkpoint::make("gan_generator", m.generator->params().serialize(), cj, st.epoch, h);
  r.encoder = Checkpoint::make("gan_encoder", m.encoder->params().serialize(), cj, st.epoch, h);
  r.discriminator = Checkpoint::make("gan_discriminator", m.discriminator->params().serialize(), cj, st.epoch, h);
  r.state = std::move(st);
  r.models = std::move(m);
  return r;
}

namespace {

GanTrainConfig gan_cfg_of(const Checkpoint& ckpt, const char* kind) {
  if (ckpt.network_kind != kind)
    throw FormatError("checkpoint holds '" + ckpt.network_kind + "', expected '" + kind + "'");
  return gan_config_from_json(ckpt.config());
}

}  // namespace

std::unique_ptr<nets::SpadeGenerator> load_generator(const Checkpoint& ckpt) {
  const auto cfg = gan_cfg_of(ckpt, "gan_generator");
  auto g = std::make_unique<nets::SpadeGenerator>(cfg.generator_spec(), cfg.input_size, derive_seed(cfg.seed, 11));
  g->params().load(ckpt.blob);
  return g;
}

std::unique_ptr<nets::StyleEncoder> load_encoder(const Checkpoint& ckpt) {
  const auto cfg = gan_cfg_of(ckpt, "gan_encoder");
  auto e = std::make_unique<nets::StyleEncoder>(cfg.encoder_spec(), cfg.input_size, derive_seed(cfg.seed, 12));
  e->params().load(ckpt.blob);
  return e;
}

std::unique_ptr<nets::Discriminator> load_discriminator(const Checkpoint& ckpt) {
  const auto cfg = gan_cfg_of(ckpt, "gan_discriminator");
  auto d = std::make_unique<nets::Discriminator>(cfg.discriminator_spec(), derive_seed(cfg.seed, 13));
  d->params().load(ckpt.blob);
  return d;
}

}  // namespace cardiosynth::train
