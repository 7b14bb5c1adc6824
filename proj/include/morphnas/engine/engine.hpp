#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "morphnas/core/error.hpp"
#include "morphnas/core/io.hpp"
#include "morphnas/core/rng.hpp"
#include "morphnas/datasets/dataset.hpp"
#include "morphnas/engine/config.hpp"
#include "morphnas/engine/history.hpp"
#include "morphnas/engine/losses.hpp"
#include "morphnas/engine/meta.hpp"
#include "morphnas/engine/publisher.hpp"
#include "morphnas/engine/setup.hpp"
#include "morphnas/heuristics/allocator.hpp"
#include "morphnas/heuristics/importance.hpp"
#include "morphnas/heuristics/loss_curve.hpp"
#include "morphnas/heuristics/threshold.hpp"
#include "morphnas/hresnet/checkpoint.hpp"
#include "morphnas/hresnet/export.hpp"
#include "morphnas/hresnet/inspect.hpp"
#include "morphnas/hresnet/morphism.hpp"
#include "morphnas/hresnet/propagate.hpp"
#include "morphnas/numkit/parallel.hpp"

namespace morphnas::engine {

enum class StopReason { budget, meta_stop, operator_stop, target_reached };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::budget: return "iteration budget reached";
    case StopReason::meta_stop: return "stop requested in meta-parameters";
    case StopReason::operator_stop: return "operator stop";
    case StopReason::target_reached: return "target train accuracy reached";
  }
  return "?";
}

/// Raised when a checkpoint cannot be written; names the last one that was.
class CheckpointError : public Error {
 public:
  CheckpointError(const std::string& what, std::filesystem::path last_good)
      : Error(what + (last_good.empty() ? std::string(" (no checkpoint written yet)")
                                        : " (last good checkpoint: " + last_good.string() + ")")),
        last_good_(std::move(last_good)) {}
  const std::filesystem::path& last_good() const { return last_good_; }

 private:
  std::filesystem::path last_good_;
};

struct RunPaths {
  std::filesystem::path out_dir;
  std::filesystem::path meta_file;  // defaults to out_dir/meta.json
};

inline constexpr int kRunFormat = 1;

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t iteration) {
  return dir / ("ckpt_" + std::to_string(iteration) + ".hrnn");
}

/// The grow / train / shrink / morph / checkpoint loop over one network.
template <class T = float>
class Engine {
 public:
  using LogSink = std::function<void(const std::string&)>;

  Engine(RunConfig cfg, data::Dataset<T> train, data::Dataset<T> test, RunPaths paths,
         std::shared_ptr<Publisher> publisher = nullptr)
      : cfg_(std::move(cfg)),
        train_(std::move(train)),
        test_(std::move(test)),
        paths_(std::move(paths)),
        pub_(publisher ? std::move(publisher) : std::make_shared<Publisher>()),
        allocator_(cfg_.search.ma_alpha, cfg_.search.guided_share) {
    check_config(cfg_);
    if (paths_.meta_file.empty()) paths_.meta_file = paths_.out_dir / "meta.json";
    if (train_.size() == 0 || test_.size() == 0) throw InvalidArgument("engine: empty dataset");
    if (train_.input_dim() != test_.input_dim() || train_.output_dim() != test_.output_dim())
      throw ShapeError("engine: train and test sets disagree on dimensions");
  }

  /// Starts a new run from the configured initial model.
  void init_fresh() {
    Rng rng(Rng::mix(cfg_.meta.seed, 0x5eed));
    const LossKind loss = train_.task == data::Task::classification ? LossKind::softmax_cross_entropy
                                                                     : LossKind::mean_squared_error;
    GrowthDefaults d = growth_defaults();
    Network<T> net = cfg_.model.initial == "linear"
                         ? make_linear_network<T>(train_.input_dim(), train_.output_dim(), loss, rng, d)
                         : make_residual_network<T>(train_.input_dim(), cfg_.model.initial_hidden,
                                                    train_.output_dim(), loss, rng, d);
    init_fresh(std::move(net));
  }

  void init_fresh(Network<T> net) {
    if (net.input_dim() != train_.input_dim() || net.output_dim() != train_.output_dim())
      throw ShapeError("engine: network dimensions do not match the dataset");
    validate(net);
    net_ = std::move(net);
    meta_ = cfg_.meta;
    rng_ = Rng(cfg_.meta.seed);
    next_iteration_ = 1;
    epoch_ = 0;
    prepare_out_dir();
    pending_meta_ = meta_;
    if (std::filesystem::exists(paths_.meta_file)) {
      poll_meta();
      meta_ = pending_meta_;
      meta_.stop = false;
      pending_meta_.stop = false;
    } else {
      write_meta_file(paths_.meta_file, meta_);
      meta_text_ = read_file_text(paths_.meta_file);
    }
    started_ = true;
    publish_status();
  }

  /// Continues the run stored in the output directory.
  void resume() {
    const auto run_file = paths_.out_dir / "run.json";
    json doc;
    try {
      doc = json::parse(read_file_text(run_file));
    } catch (const json::exception& e) {
      throw FormatError("resume: " + run_file.string() + " is not valid JSON: " + e.what());
    }
    if (doc.value("format", 0) != kRunFormat) throw FormatError("resume: unsupported run.json format");
    const auto& st = doc.at("state");
    const std::string ckpt = st.at("checkpoint").get<std::string>();
    if (ckpt.empty()) throw FormatError("resume: run has no checkpoint yet");
    net_ = load_checkpoint<T>(paths_.out_dir / ckpt);
    if (net_.input_dim() != train_.input_dim() || net_.output_dim() != train_.output_dim())
      throw ShapeError("resume: checkpoint does not match the dataset dimensions");
    last_checkpoint_ = paths_.out_dir / ckpt;
    next_iteration_ = st.at("next_iteration").get<std::size_t>();
    epoch_ = st.at("epoch").get<std::size_t>();
    rng_.restore(st.at("rng").get<std::string>());
    elapsed_before_ = st.value("elapsed", 0.0);
    meta_ = meta_from_json(st.at("meta"));
    meta_.stop = false;
    for (const auto& [k, v] : st.at("ma").items()) allocator_.set_average(parse_layer_id(k), v.template get<double>());
    history_.clear();
    for (const auto& e : doc.at("history")) history_.push_back(history_event_from_json(e));
    reports_ = doc.at("reports").get<std::vector<json>>();
    log_ = doc.value("log", json::array()).get<std::vector<json>>();
    pub_->load_history(history_);
    pending_meta_ = meta_;
    if (std::filesystem::exists(paths_.meta_file)) {
      poll_meta();
      meta_ = pending_meta_;
    } else {
      write_meta_file(paths_.meta_file, meta_);
    }
    // A stop left in the meta file ended the previous session; resuming clears it.
    if (meta_.stop) {
      meta_.stop = pending_meta_.stop = false;
      write_meta_file(paths_.meta_file, meta_);
      meta_text_ = read_file_text(paths_.meta_file);
    }
    started_ = true;
    log("resumed at iteration " + std::to_string(next_iteration_) + ", epoch " + std::to_string(epoch_));
    publish_status();
  }

  /// Runs iterations until a stop condition. `max_iterations` overrides the
  /// configured budget (a total over all sessions of the run).
  StopReason run(std::optional<std::size_t> max_iterations = std::nullopt) {
    if (!started_) throw InvalidArgument("engine: call init_fresh() or resume() first");
    if (cfg_.training.threads) numkit::set_num_threads(cfg_.training.threads);
    const std::size_t budget = max_iterations.value_or(cfg_.search.max_iterations);
    StopReason reason = StopReason::budget;
    // Starting a session is an iteration boundary.
    poll_meta();
    meta_ = pending_meta_;
    pub_->marker({{"type", "run"}, {"state", "started"}, {"iteration", next_iteration_}, {"epoch", epoch_}});
    while (true) {
      if (auto r = stop_reason()) {
        reason = *r;
        break;
      }
      if (next_iteration_ > budget) {
        reason = StopReason::budget;
        break;
      }
      const IterationReport rep = iterate();
      if (auto r = stop_reason()) {
        reason = *r;
        break;
      }
      if (cfg_.search.target_train_accuracy && rep.train.accuracy &&
          *rep.train.accuracy >= *cfg_.search.target_train_accuracy) {
        reason = StopReason::target_reached;
        break;
      }
    }
    stop_reason_ = reason;
    phase_ = "stopped";
    log(std::string("stopped: ") + to_string(reason));
    save_run_file();
    publish_status();
    pub_->marker({{"type", "run"}, {"state", "stopped"}, {"reason", to_string(reason)}});
    pub_->hub().finish();
    return reason;
  }

  /// Thread-safe; honoured at the next epoch boundary.
  void request_stop() { stop_requested_.store(true); }

  const Network<T>& network() const { return net_; }
  Network<T>& mutable_network() { return net_; }
  const std::vector<HistoryEvent>& history() const { return history_; }
  const std::vector<json>& reports() const { return reports_; }
  const MetaParams& meta() const { return meta_; }
  const MetaParams& pending_meta() const { return pending_meta_; }
  std::size_t next_iteration() const { return next_iteration_; }
  std::size_t epoch() const { return epoch_; }
  const RunConfig& config() const { return cfg_; }
  const RunPaths& paths() const { return paths_; }
  std::shared_ptr<Publisher> publisher() const { return pub_; }
  const std::filesystem::path& last_checkpoint() const { return last_checkpoint_; }
  const data::Dataset<T>& train_set() const { return train_; }
  const data::Dataset<T>& test_set() const { return test_; }
  void set_log_sink(LogSink sink) { log_sink_ = std::move(sink); }

  /// Importance scores of every hidden unit over one eval-mode pass of the
  /// training set (gradients of the summed loss, parameters untouched).
  std::vector<heuristics::NeuronScore> importance() {
    heuristics::ImportanceAccumulator acc;
    const ActivationSink<T> sink = [&acc](LayerId id, const Matrix<T>& a, const Matrix<T>& g) {
      acc.accumulate(id, a, g);
    };
    for (const auto& rows : data::batches(train_.size(), cfg_.training.eval_batch_size, 0, 0, false)) {
      const auto b = data::gather(train_, rows);
      ForwardCache<T> cache;
      const auto y = forward(net_, b.inputs, Mode::eval, nullptr, &cache);
      const auto e = batch_loss(net_.loss, y, b, true, 1.0);
      backward(net_, cache, e.grad, sink);
    }
    zero_grad(net_);
    if (acc.layers().empty()) return {};
    return heuristics::importance_scores(acc, cfg_.search.firing_exponent);
  }

 private:
  struct EpochResult {
    double loss = 0.0;
    std::optional<double> accuracy;
  };

  GrowthDefaults growth_defaults() const {
    GrowthDefaults d;
    d.dropout_p = cfg_.model.dropout_p;
    d.seed_hidden = cfg_.model.seed_hidden;
    d.adam = {cfg_.training.adam_beta1, cfg_.training.adam_beta2, cfg_.training.adam_eps};
    return d;
  }

  static LayerId parse_layer_id(const std::string& s) {
    if (s.size() < 2 || s[0] != 'L') throw FormatError("bad layer id \"" + s + "\"");
    return LayerId{static_cast<std::uint32_t>(std::stoul(s.substr(1)))};
  }

  double now() const {
    return elapsed_before_ +
           std::chrono::duration<double>(std::chrono::steady_clock::now() - session_start_).count();
  }

  void log(const std::string& msg, const char* level = "info") {
    log_.push_back({{"time", now()}, {"epoch", epoch_}, {"level", level}, {"message", msg}});
    if (log_sink_) log_sink_(std::string(level) + ": " + msg);
    if (std::string(level) == "warning") pub_->marker({{"type", "warning"}, {"message", msg}});
  }

  void prepare_out_dir() {
    std::error_code ec;
    std::filesystem::create_directories(paths_.out_dir, ec);
    if (ec || !std::filesystem::is_directory(paths_.out_dir))
      throw Error("cannot create output directory " + paths_.out_dir.string());
    const auto probe = paths_.out_dir / ".write_probe";
    try {
      write_file_atomic(probe, std::string_view("ok"));
    } catch (const Error&) {
      throw Error("output directory " + paths_.out_dir.string() + " is not writable");
    }
    std::filesystem::remove(probe, ec);
  }

 public:
  static void write_meta_file(const std::filesystem::path& path, const MetaParams& m) {
    write_file_atomic(path, to_json(m).dump(2) + "\n");
  }

 private:
  /// Re-reads the meta file when its content changed. Learning rate and stop
  /// take effect at once; structural values wait for the iteration boundary.
  void poll_meta() {
    std::string text;
    try {
      text = read_file_text(paths_.meta_file);
    } catch (const Error&) {
      if (!meta_missing_warned_) log("meta file " + paths_.meta_file.string() + " is missing", "warning");
      meta_missing_warned_ = true;
      return;
    }
    meta_missing_warned_ = false;
    if (text == meta_text_) return;
    meta_text_ = text;
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      log(std::string("ignoring malformed meta file: ") + e.what(), "warning");
      return;
    }
    std::vector<FieldError> errs;
    auto merged = merge_meta(pending_meta_, doc, errs);
    if (!merged) {
      log("ignoring invalid meta file: " + describe(errs), "warning");
      return;
    }
    if (*merged == pending_meta_) return;
    pending_meta_ = *merged;
    if (meta_.learning_rate != pending_meta_.learning_rate) {
      log("learning rate " + format_real(meta_.learning_rate) + " -> " + format_real(pending_meta_.learning_rate));
      meta_.learning_rate = pending_meta_.learning_rate;
    }
    meta_.stop = pending_meta_.stop;
    pub_->marker({{"type", "meta"}, {"pending", to_json(pending_meta_)}, {"epoch", epoch_}});
  }

  std::optional<StopReason> stop_reason() const {
    if (stop_requested_.load()) return StopReason::operator_stop;
    if (meta_.stop) return StopReason::meta_stop;
    return std::nullopt;
  }

  void set_phase(const std::string& phase) {
    phase_ = phase;
    pub_->marker({{"type", "phase"}, {"phase", phase}, {"iteration", current_iteration_}, {"epoch", epoch_}});
    publish_status();
  }

  /// One pass over shuffled mini-batches. With `decay_gamma` < 1 every step
  /// also fades the units registered for decay.
  EpochResult train_epoch(T decay_gamma) {
    const std::size_t global_epoch = epoch_ + 1;
    double loss = 0.0;
    std::size_t correct = 0;
    const T lr = static_cast<T>(meta_.learning_rate);
    for (const auto& rows : data::batches(train_.size(), cfg_.training.batch_size, meta_.seed, global_epoch)) {
      const auto b = data::gather(train_, rows);
      ForwardCache<T> cache;
      const auto y = forward(net_, b.inputs, Mode::train, &rng_, &cache);
      const auto e = batch_loss(net_.loss, y, b, true, 1.0 / static_cast<double>(b.size()));
      zero_grad(net_);
      backward(net_, cache, e.grad);
      adam_update(net_, lr);
      if (decay_gamma < T{1}) apply_decay_step(net_, decay_gamma);
      loss += e.loss_sum;
      correct += e.correct;
    }
    EpochResult r;
    r.loss = loss / static_cast<double>(train_.size());
    if (train_.task == data::Task::classification)
      r.accuracy = static_cast<double>(correct) / static_cast<double>(train_.size());
    epoch_ = global_epoch;

    const Metrics test = evaluate(net_, test_, cfg_.training.eval_batch_size);
    HistoryEvent ev;
    ev.time = now();
    ev.epoch = epoch_;
    ev.iteration = current_iteration_;
    ev.phase = phase_;
    ev.train_loss = r.loss;
    ev.train_accuracy = r.accuracy;
    ev.test_loss = test.loss;
    ev.test_accuracy = test.accuracy;
    ev.param_count = count_params(net_);
    ev.depth = depth(net_, cfg_.search.depth_floor);
    ev.hidden = total_hidden(net_);
    ev.learning_rate = meta_.learning_rate;
    history_.push_back(ev);
    pub_->append_history(ev);
    if (log_sink_) {
      log_sink_("epoch " + std::to_string(epoch_) + " [" + phase_ + "] loss " + format_real(r.loss) +
                (r.accuracy ? " acc " + format_real(*r.accuracy) : std::string()) + " | test " +
                format_real(test.loss) + (test.accuracy ? " acc " + format_real(*test.accuracy) : std::string()) +
                " | params " + std::to_string(ev.param_count));
    }
    poll_meta();
    publish_status();
    return r;
  }

  void note(IterationReport& rep, const MorphReport& m) {
    rep.morph_param_delta += static_cast<long long>(m.params_after) - static_cast<long long>(m.params_before);
    if (m.applied) morph_log_.push_back({{"kind", to_string(m.kind)}, {"layer", to_string(m.layer)},
                                         {"params_before", m.params_before}, {"params_after", m.params_after}});
  }

  IterationReport iterate() {
    using clock = std::chrono::steady_clock;
    IterationReport rep;
    rep.iteration = current_iteration_ = next_iteration_;
    rep.meta = meta_;
    rep.params_before = count_params(net_);
    rep.depth_before = depth(net_, cfg_.search.depth_floor);
    rep.hidden_before = total_hidden(net_);
    morph_log_ = json::array();
    auto t0 = clock::now();
    auto lap = [&](const char* name) {
      const auto t = clock::now();
      rep.timings[name] = std::chrono::duration<double>(t - t0).count();
      t0 = t;
    };

    // Growth phase.
    set_phase("growth");
    for (const auto& m : promote_blocks(net_, rng_)) note(rep, m);
    const std::size_t p_total = meta_.neurons_to_add;
    const auto alloc = allocator_.allocate(p_total, catalog(net_), rng_);
    std::map<LayerId, LayerDelta> deltas;
    for (const auto& [id, k] : alloc) {
      deltas[id] = {id, k, 0};
      if (k > 0) note(rep, widen(net_, id, k, rng_));
    }
    rep.neurons_added = p_total;
    lap("growth");

    // Train until the loss curve flattens.
    set_phase("train");
    std::vector<double> losses;
    bool interrupted = false;
    while (true) {
      losses.push_back(train_epoch(T{1}).loss);
      ++rep.train_epochs;
      if (stop_reason()) {
        interrupted = true;
        rep.interrupted = "train";
        break;
      }
      if (losses.size() >= 3) {
        const auto fit = heuristics::fit_loss_curve(losses);
        rep.fit_a = fit.a;
        if (heuristics::should_stop(fit, losses.size(), meta_.max_train_epochs, cfg_.search.flatten_threshold)) break;
      } else if (losses.size() >= meta_.max_train_epochs) {
        break;
      }
    }
    lap("train");

    std::vector<NeuronRef> victims;
    if (!interrupted) {
      // Shrink phase: score, fade, prune.
      set_phase("importance");
      rep.prune_requested = meta_.prune_target(p_total);
      if (rep.prune_requested > 0) {
        const auto scores = importance();
        const auto sel = heuristics::select_prune(scores, rep.prune_requested, catalog(net_));
        victims = sel.victims;
        rep.prune_shortfall = sel.shortfall;
      }
      lap("importance");

      set_phase("decay");
      if (!victims.empty()) {
        mark_decay(net_, std::span<const NeuronRef>(victims));
        const std::size_t steps_per_epoch =
            (train_.size() + cfg_.training.batch_size - 1) / cfg_.training.batch_size;
        const double gamma = decay_gamma(cfg_.search.decay_target, meta_.decay_epochs * steps_per_epoch);
        for (std::size_t e = 0; e < meta_.decay_epochs; ++e) {
          train_epoch(static_cast<T>(gamma));
          if (stop_reason()) {
            rep.interrupted = "decay";
            break;
          }
        }
      }
      lap("decay");
    }

    // Structural updates; cheap, so they also run when a stop cut the decay short.
    set_phase("morph");
    if (!victims.empty()) {
      const auto pr = prune(net_, std::span<const NeuronRef>(victims));
      note(rep, pr);
      for (const auto& [id, n] : pr.hidden_removed) {
        deltas[id].id = id;
        deltas[id].removed += n;
        rep.pruned += n;
      }
    }
    if (!interrupted) {
      const auto cat = catalog(net_);
      for (auto it = cat.rbegin(); it != cat.rend(); ++it) {
        if (locate(net_, it->id).node == nullptr) continue;
        const auto m = remove_layer_if_empty(net_, it->id, cfg_.search.layer_floor);
        note(rep, m);
        if (!m.applied) continue;
        for (const auto& [id, n] : m.hidden_removed) {
          deltas[id].id = id;
          deltas[id].removed += n;
          rep.removed_with_layers += n;
        }
        for (auto id : m.removed) rep.removed.push_back(id);
      }
      for (const auto& e : catalog(net_)) {
        if (!e.growable || e.fan_in == 0 || e.fan_out == 0) continue;
        if (!heuristics::exceeds_growth_threshold(e.hidden, e.fan_in, e.fan_out)) continue;
        const auto m = grow_layer(net_, e.id, rng_);
        note(rep, m);
        if (m.applied) rep.grown.push_back(e.id);
      }
    }
    validate(net_);

    std::map<LayerId, long long> dn;
    for (const auto& [id, d] : deltas) {
      rep.layers.push_back(d);
      dn[id] = d.delta();
    }
    allocator_.update_ma(dn);
    allocator_.retain(catalog(net_));
    lap("morph");

    rep.params_after = count_params(net_);
    rep.depth_after = depth(net_, cfg_.search.depth_floor);
    rep.hidden_after = total_hidden(net_);
    rep.train = evaluate(net_, train_, cfg_.training.eval_batch_size);
    rep.test = evaluate(net_, test_, cfg_.training.eval_batch_size);
    lap("evaluate");

    // Checkpoint, then pick up the operator's latest meta-parameters.
    set_phase("checkpoint");
    next_iteration_ = current_iteration_ + 1;
    json rj = to_json(rep);
    rj["morphs"] = morph_log_;
    reports_.push_back(rj);
    save_iteration(rep);
    lap("checkpoint");
    reports_.back()["timings"] = rep.timings;

    poll_meta();
    if (!(pending_meta_ == meta_)) {
      log("meta-parameters applied for iteration " + std::to_string(next_iteration_) + ": " +
          to_json(pending_meta_).dump());
    }
    meta_ = pending_meta_;
    pub_->marker({{"type", "iteration"}, {"report", reports_.back()}});
    if (log_sink_) {
      log_sink_("iteration " + std::to_string(rep.iteration) + ": params " + std::to_string(rep.params_before) +
                " -> " + std::to_string(rep.params_after) + ", depth " + std::to_string(rep.depth_after) +
                ", train " + format_real(rep.train.accuracy.value_or(rep.train.loss)) + ", test " +
                format_real(rep.test.accuracy.value_or(rep.test.loss)));
    }
    publish_status();
    return rep;
  }

  void save_iteration(const IterationReport& rep) {
    const auto ckpt = checkpoint_path(paths_.out_dir, rep.iteration);
    try {
      save_checkpoint(ckpt, net_);
      write_file_atomic(paths_.out_dir / ("meta_applied_" + std::to_string(rep.iteration) + ".json"),
                        to_json(rep.meta).dump(2) + "\n");
      last_checkpoint_ = ckpt;
      save_run_file();
    } catch (const CheckpointError&) {
      throw;
    } catch (const Error& e) {
      throw CheckpointError(std::string("checkpoint write failed: ") + e.what(), last_checkpoint_);
    }
  }

  json state_json() const {
    json ma = json::object();
    for (const auto& [id, v] : allocator_.averages()) ma[to_string(id)] = v;
    return json{{"next_iteration", next_iteration_},
                {"epoch", epoch_},
                {"rng", rng_.state()},
                {"ma", ma},
                {"meta", to_json(meta_)},
                {"checkpoint", last_checkpoint_.empty() ? std::string() : last_checkpoint_.filename().string()},
                {"elapsed", now()},
                {"stop_reason", stop_reason_ ? to_string(*stop_reason_) : ""}};
  }

  void save_run_file() {
    json hist = json::array();
    for (const auto& e : history_) hist.push_back(to_json(e));
    json doc{{"format", kRunFormat}, {"config", to_json(cfg_)}, {"state", state_json()},
             {"history", hist},      {"reports", reports_},     {"log", log_}};
    try {
      write_file_atomic(paths_.out_dir / "run.json", doc.dump(1) + "\n");
    } catch (const Error& e) {
      throw CheckpointError(std::string("run.json write failed: ") + e.what(), last_checkpoint_);
    }
  }

  void publish_status() {
    json latest = history_.empty() ? json(nullptr) : to_json(history_.back());
    json fit = json(nullptr);
    if (!reports_.empty()) fit = reports_.back().value("fit_a", json(nullptr));
    pub_->set_status({{"iteration", current_iteration_ ? current_iteration_ : next_iteration_ - 1},
                      {"next_iteration", next_iteration_},
                      {"epoch", epoch_},
                      {"phase", phase_},
                      {"param_count", count_params(net_)},
                      {"depth", depth(net_, cfg_.search.depth_floor)},
                      {"hidden", total_hidden(net_)},
                      {"meta", to_json(meta_)},
                      {"pending_meta", to_json(pending_meta_)},
                      {"latest", latest},
                      {"fit_a", fit},
                      {"running", phase_ != "stopped"},
                      {"stop_reason", stop_reason_ ? json(to_string(*stop_reason_)) : json(nullptr)}});
    pub_->set_architecture(export_architecture(net_, cfg_.search.depth_floor));
  }

  RunConfig cfg_;
  data::Dataset<T> train_;
  data::Dataset<T> test_;
  RunPaths paths_;
  std::shared_ptr<Publisher> pub_;
  heuristics::GrowthAllocator allocator_;
  Network<T> net_;
  Rng rng_;
  MetaParams meta_;
  MetaParams pending_meta_;
  std::string meta_text_;
  bool meta_missing_warned_ = false;
  std::size_t next_iteration_ = 1;
  std::size_t current_iteration_ = 0;
  std::size_t epoch_ = 0;
  std::string phase_ = "idle";
  std::vector<HistoryEvent> history_;
  std::vector<json> reports_;
  std::vector<json> log_;
  json morph_log_ = json::array();
  std::filesystem::path last_checkpoint_;
  std::optional<StopReason> stop_reason_;
  std::atomic<bool> stop_requested_{false};
  bool started_ = false;
  double elapsed_before_ = 0.0;
  std::chrono::steady_clock::time_point session_start_ = std::chrono::steady_clock::now();
  LogSink log_sink_;
};

}  // namespace morphnas::engine
