#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <unistd.h>

#include "morphnas/engine/engine.hpp"
#include "morphnas/hresnet/checkpoint.hpp"

namespace morphnas::engine {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = fs::temp_directory_path() /
                   ("morphnas_engine_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(dir);
  return dir;
}

RunConfig small_config() {
  RunConfig c;
  c.dataset.kind = "spiral";
  c.dataset.n_per_class = 60;
  c.dataset.test_per_class = 40;
  c.model.initial = "residual";
  c.model.initial_hidden = 6;
  c.training.batch_size = 16;
  c.training.eval_batch_size = 50;
  c.training.threads = 1;
  c.search.max_iterations = 2;
  c.meta.neurons_to_add = 8;
  c.meta.prune_count = 3;
  c.meta.max_train_epochs = 4;
  c.meta.decay_epochs = 1;
  c.meta.learning_rate = 1e-2;
  c.meta.seed = 7;
  return c;
}

Engine<float> make_engine(const RunConfig& c, const fs::path& dir) {
  auto d = load_datasets<float>(c.dataset);
  return Engine<float>(c, std::move(d.train), std::move(d.test), RunPaths{dir, {}});
}

std::string slurp(const fs::path& p) { return read_file_text(p); }

// ---------------------------------------------------------------------------
// Meta-parameters

TEST(Meta, MergeAppliesValidFields) {
  std::vector<FieldError> errs;
  const auto m = merge_meta(MetaParams{}, json{{"learning_rate", 0.5}, {"neurons_to_add", 10}, {"prune_ratio", 0.25}},
                            errs);
  ASSERT_TRUE(m);
  EXPECT_TRUE(errs.empty());
  EXPECT_EQ(m->learning_rate, 0.5);
  EXPECT_EQ(m->neurons_to_add, 10u);
  EXPECT_EQ(m->prune_target(10), 3u);  // llround(2.5)
  EXPECT_EQ(m->max_train_epochs, MetaParams{}.max_train_epochs);
}

TEST(Meta, InvalidUpdateIsAllOrNothingAndNamesFields) {
  MetaParams base;
  base.learning_rate = 0.1;
  std::vector<FieldError> errs;
  const auto m = merge_meta(base, json{{"learning_rate", 0.2}, {"max_train_epochs", 0}, {"prune_ratio", 2}, {"bogus", 1}},
                            errs);
  EXPECT_FALSE(m);
  std::set<std::string> fields;
  for (const auto& e : errs) fields.insert(e.field);
  EXPECT_EQ(fields, (std::set<std::string>{"max_train_epochs", "prune_ratio", "bogus"}));
  EXPECT_THROW(meta_from_json(json{{"learning_rate", -1}}), InvalidArgument);
  EXPECT_THROW(meta_from_json(json{{"learning_rate", "fast"}}), InvalidArgument);
  EXPECT_THROW(meta_from_json(json{{"stop", 1}}), InvalidArgument);
  EXPECT_THROW(meta_from_json(json{{"neurons_to_add", 1.5}}), InvalidArgument);
  EXPECT_THROW(meta_from_json(json::array()), InvalidArgument);
}

TEST(Meta, NullClearsPruneFieldsAndRatioWins) {
  MetaParams base;
  base.prune_count = 5;
  base.prune_ratio = 0.5;
  EXPECT_EQ(base.prune_target(8), 4u);
  const auto m = meta_from_json(json{{"prune_ratio", nullptr}}, base);
  EXPECT_FALSE(m.prune_ratio);
  EXPECT_EQ(m.prune_target(8), 5u);
  const auto n = meta_from_json(json{{"prune_count", nullptr}}, m);
  EXPECT_EQ(n.prune_target(8), 0u);
}

TEST(Meta, JsonRoundTrip) {
  MetaParams m;
  m.prune_ratio = 0.3;
  m.seed = 99;
  m.stop = true;
  EXPECT_EQ(meta_from_json(to_json(m)), m);
}

// ---------------------------------------------------------------------------
// Config

TEST(Config, EmptyDocumentGivesDefaults) {
  const auto c = config_from_json(json::object());
  const RunConfig d;
  EXPECT_EQ(to_json(c), to_json(d));
  EXPECT_EQ(c.dataset.kind, "spiral");
  EXPECT_EQ(c.search.depth_floor, 10u);
}

TEST(Config, RoundTripAndRejections) {
  auto c = small_config();
  c.search.target_train_accuracy = 0.9;
  EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
  EXPECT_THROW(config_from_json(json{{"nonsense", json::object()}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"dataset", {{"n_per_clas", 5}}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"model", 3}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"training", {{"weight_decay", 0.1}}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"training", {{"batch_size", 0}}}}), InvalidArgument);
  EXPECT_THROW(config_from_json(json{{"meta", {{"learning_rate", 0}}}}), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Losses and evaluation

TEST(Losses, SoftmaxCrossEntropyValueAndGradient) {
  Matrix<double> logits(2, 3);
  logits(1, 0) = 1.0;
  logits(1, 1) = 2.0;
  logits(1, 2) = 3.0;
  const std::vector<std::uint32_t> labels{0, 2};
  const auto e = softmax_cross_entropy(logits, std::span(labels), true, 1.0);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(e.loss_sum, std::log(3.0) + (std::log(z) - 3.0), 1e-12);
  EXPECT_EQ(e.correct, 2u);  // row 0 ties resolve to class 0
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      Matrix<double> up = logits, dn = logits;
      up(i, j) += 1e-6;
      dn(i, j) -= 1e-6;
      const double fd = (softmax_cross_entropy(up, std::span(labels), false, 1.0).loss_sum -
                         softmax_cross_entropy(dn, std::span(labels), false, 1.0).loss_sum) / 2e-6;
      EXPECT_NEAR(e.grad(i, j), fd, 1e-7);
    }
}

TEST(Losses, SquaredErrorIsMeanOverOutputs) {
  Matrix<double> y(1, 2), t(1, 2);
  y(0, 0) = 1.0;
  y(0, 1) = 3.0;
  const auto e = squared_error(y, t, true, 1.0);
  EXPECT_DOUBLE_EQ(e.loss_sum, 5.0);
  EXPECT_DOUBLE_EQ(e.grad(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.grad(0, 1), 3.0);
}

TEST(Evaluate, MemorizerScoresPerfectly) {
  // One-hot inputs, identity weights: argmax is the label.
  data::Dataset<double> d;
  d.num_classes = 4;
  d.inputs = Matrix<double>(8, 4);
  for (std::size_t i = 0; i < 8; ++i) {
    d.inputs(i, i % 4) = 1.0;
    d.labels.push_back(static_cast<std::uint32_t>(i % 4));
  }
  Rng rng(1);
  auto net = make_linear_network<double>(4, 4, LossKind::softmax_cross_entropy, rng);
  auto& l = net.blocks[0].linear();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) l.weight(i, j) = i == j ? 50.0 : 0.0;
  for (auto& b : l.bias.values()) b = 0.0;
  const auto m = evaluate(net, d, 3);
  EXPECT_EQ(*m.accuracy, 1.0);
  EXPECT_LT(m.loss, 1e-20);
}

TEST(Evaluate, RandomNetworkIsNearChance) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    data::Dataset<double> d;
    d.num_classes = 10;
    d.inputs = Matrix<double>(1000, 5);
    for (auto& v : d.inputs.values()) v = rng.normal();
    for (std::size_t i = 0; i < 1000; ++i) d.labels.push_back(static_cast<std::uint32_t>(rng.below(10)));
    auto net = make_residual_network<double>(5, 8, 10, LossKind::softmax_cross_entropy, rng);
    total += *evaluate(net, d, 128).accuracy;
  }
  EXPECT_NEAR(total / 10.0, 0.1, 0.02);
}

TEST(Evaluate, ZeroNetworkOnZeroTargetsHasZeroError) {
  auto d = data::gen_grid_regression<double>(50, 3);
  for (auto& v : d.targets.values()) v = 0.0;
  Rng rng(2);
  auto net = make_linear_network<double>(2, 1, LossKind::mean_squared_error, rng);
  for (auto& v : net.blocks[0].linear().weight.values()) v = 0.0;
  for (auto& v : net.blocks[0].linear().bias.values()) v = 0.0;
  const auto m = evaluate(net, d);
  EXPECT_EQ(m.loss, 0.0);
  EXPECT_FALSE(m.accuracy);
}

// ---------------------------------------------------------------------------
// History and reports

TEST(History, CsvHeaderAndRows) {
  HistoryEvent e;
  e.time = 12.5;
  e.epoch = 3;
  e.iteration = 1;
  e.phase = "train";
  e.train_loss = 0.25;
  e.train_accuracy = 0.875;
  e.test_loss = 0.5;
  e.param_count = 42;
  e.depth = 2;
  e.hidden = 7;
  e.learning_rate = 0.001;
  const auto csv = history_csv({e});
  EXPECT_EQ(csv,
            "epoch,iteration,phase,train_loss,train_accuracy,test_loss,test_accuracy,param_count,depth,hidden,"
            "learning_rate\n3,1,train,0.25,0.875,0.5,,42,2,7,0.001\n");
  const auto back = history_event_from_json(to_json(e));
  EXPECT_EQ(history_csv({back}), csv);
  EXPECT_EQ(back.time, 12.5);
}

TEST(History, FlatFitSerializesAsNull) {
  IterationReport r;
  r.fit_a = -std::numeric_limits<double>::infinity();
  const auto j = to_json(r);
  EXPECT_TRUE(j.at("fit_a").is_null());
  EXPECT_TRUE(j.at("fit_flat").get<bool>());
  EXPECT_NO_THROW((void)j.dump());
}

// ---------------------------------------------------------------------------
// Publisher

TEST(Publisher, StatusIsNullBeforeStart) {
  Publisher p;
  EXPECT_EQ(p.status(), nullptr);
  p.set_status({{"phase", "train"}});
  ASSERT_NE(p.status(), nullptr);
  EXPECT_EQ(p.status()->at("phase"), "train");
}

TEST(Publisher, HistorySinceAndEventOrder) {
  Publisher p;
  auto [sub, cursor] = p.hub().subscribe();
  EXPECT_EQ(cursor, 0u);
  for (std::size_t e = 1; e <= 5; ++e) {
    HistoryEvent ev;
    ev.epoch = e;
    p.append_history(ev);
  }
  EXPECT_EQ(p.history_since(3).size(), 2u);
  EXPECT_EQ(p.history_since(0).size(), 5u);
  for (std::size_t e = 1; e <= 5; ++e) {
    auto m = sub->next(std::chrono::milliseconds(100));
    ASSERT_TRUE(m);
    EXPECT_EQ(m->at("type"), "epoch");
    EXPECT_EQ(m->at("epoch").get<std::size_t>(), e);
  }
  EXPECT_FALSE(sub->next(std::chrono::milliseconds(1)));
}

TEST(Publisher, SlowSubscriberGetsGapWithCursor) {
  Publisher p;
  auto [sub, cursor] = p.hub().subscribe();
  const std::size_t n = EventHub::kCapacity + 50;
  for (std::size_t e = 1; e <= n; ++e) {
    HistoryEvent ev;
    ev.epoch = e;
    p.append_history(ev);
  }
  std::size_t last = 0;
  bool saw_gap = false;
  while (auto m = sub->next(std::chrono::milliseconds(1))) {
    if (m->at("type") == "gap") {
      saw_gap = true;
      EXPECT_EQ(m->at("cursor").get<std::size_t>(), last);
      EXPECT_EQ(m->at("missed").get<std::size_t>(), 50u);
      // The missed epochs are still in the history.
      EXPECT_EQ(p.history_since(last).size(), n - last);
    } else {
      EXPECT_EQ(m->at("epoch").get<std::size_t>(), last + 1);
      last = m->at("epoch").get<std::size_t>();
    }
  }
  EXPECT_TRUE(saw_gap);
  EXPECT_EQ(last, EventHub::kCapacity);
}

TEST(Publisher, FinishClosesStreams) {
  Publisher p;
  auto [sub, cursor] = p.hub().subscribe();
  p.hub().finish();
  EXPECT_FALSE(sub->next(std::chrono::milliseconds(1)));
  EXPECT_TRUE(sub->closed());
}

// ---------------------------------------------------------------------------
// Engine

TEST(Engine, ZeroGrowthZeroPruneKeepsArchitecture) {
  auto c = small_config();
  c.model.initial_hidden = 2;  // 2^3 = 2 * 2^2, below the growth threshold
  c.meta.neurons_to_add = 0;
  c.meta.prune_count.reset();
  c.search.max_iterations = 1;
  auto e = make_engine(c, fresh_dir("zero"));
  e.init_fresh();
  const auto before = export_architecture(e.network());
  const auto params = count_params(e.network());
  EXPECT_EQ(e.run(), StopReason::budget);
  EXPECT_EQ(export_architecture(e.network()), before);
  EXPECT_EQ(count_params(e.network()), params);
  const auto& rep = e.reports().at(0);
  EXPECT_EQ(rep.at("M"), 0);
  EXPECT_EQ(rep.at("P"), 0);
}

TEST(Engine, IterationAccountingIsConsistent) {
  auto c = small_config();
  c.search.max_iterations = 3;
  const auto dir = fresh_dir("accounting");
  auto e = make_engine(c, dir);
  e.init_fresh();
  std::vector<std::size_t> hidden{total_hidden(e.network())};
  EXPECT_EQ(e.run(), StopReason::budget);
  ASSERT_EQ(e.reports().size(), 3u);
  for (const auto& r : e.reports()) {
    EXPECT_EQ(r.at("P"), 8);
    EXPECT_EQ(r.at("M_requested"), 3);
    EXPECT_EQ(r.at("M").get<long long>() + r.at("prune_shortfall").get<long long>(), 3);
    EXPECT_EQ(r.at("dN").get<long long>(),
              r.at("P").get<long long>() - r.at("M").get<long long>() - r.at("M_layers").get<long long>());
    // Without layer growth the hidden count moves by exactly P - M.
    if (r.at("grown").empty()) {
      EXPECT_EQ(r.at("hidden_after").get<long long>() - r.at("hidden_before").get<long long>(),
                r.at("dN").get<long long>());
    }
    EXPECT_EQ(r.at("morph_param_delta").get<long long>(),
              r.at("params_after").get<long long>() - r.at("params_before").get<long long>());
    long long sum = 0;
    for (const auto& l : r.at("layers")) sum += l.at("P").get<long long>() - l.at("M").get<long long>();
    EXPECT_EQ(sum, r.at("dN").get<long long>());
    EXPECT_GE(r.at("train_epochs").get<int>(), 1);
    EXPECT_LE(r.at("train_epochs").get<int>(), 4);
  }
  for (std::size_t i = 1; i <= 3; ++i) {
    EXPECT_TRUE(fs::exists(checkpoint_path(dir, i)));
    EXPECT_TRUE(fs::exists(dir / ("meta_applied_" + std::to_string(i) + ".json")));
  }
  EXPECT_TRUE(fs::exists(dir / "run.json"));
  EXPECT_TRUE(fs::exists(dir / "meta.json"));
  EXPECT_TRUE(validate_architecture(*e.publisher()->architecture()).empty());
  const auto last = load_checkpoint<float>(checkpoint_path(dir, 3));
  EXPECT_EQ(serialize(last), serialize(e.network()));
  // Epochs are numbered globally and without gaps.
  for (std::size_t i = 0; i < e.history().size(); ++i) EXPECT_EQ(e.history()[i].epoch, i + 1);
}

TEST(Engine, RegressionRunReportsNoAccuracy) {
  auto c = small_config();
  c.dataset.kind = "grid";
  c.dataset.n_train = 200;
  c.dataset.n_test = 50;
  c.search.max_iterations = 1;
  auto e = make_engine(c, fresh_dir("grid"));
  e.init_fresh();
  e.run();
  EXPECT_FALSE(e.history().front().train_accuracy);
  EXPECT_TRUE(e.reports().front().at("train").at("accuracy").is_null());
}

TEST(Engine, FreshRunsAreDeterministic) {
  auto c = small_config();
  auto a = make_engine(c, fresh_dir("det_a"));
  auto b = make_engine(c, fresh_dir("det_b"));
  a.init_fresh();
  b.init_fresh();
  a.run();
  b.run();
  EXPECT_EQ(history_csv(a.history()), history_csv(b.history()));
  EXPECT_EQ(serialize(a.network()), serialize(b.network()));
}

TEST(Engine, ResumeContinuesBitIdentically) {
  auto c = small_config();
  c.search.max_iterations = 3;
  auto whole = make_engine(c, fresh_dir("whole"));
  whole.init_fresh();
  whole.run();

  const auto dir = fresh_dir("split");
  {
    auto first = make_engine(c, dir);
    first.init_fresh();
    EXPECT_EQ(first.run(1), StopReason::budget);
  }
  auto second = make_engine(c, dir);
  second.resume();
  EXPECT_EQ(second.next_iteration(), 2u);
  EXPECT_EQ(second.run(), StopReason::budget);
  EXPECT_EQ(history_csv(second.history()), history_csv(whole.history()));
  EXPECT_EQ(serialize(second.network()), serialize(whole.network()));
  EXPECT_EQ(second.reports().size(), 3u);
}

TEST(Engine, ResumeWithoutRunFileFails) {
  auto e = make_engine(small_config(), fresh_dir("noresume"));
  EXPECT_THROW(e.resume(), Error);
}

TEST(Engine, LearningRateEditTakesEffectNextEpoch) {
  auto c = small_config();
  c.search.max_iterations = 1;
  c.meta.max_train_epochs = 4;
  const auto dir = fresh_dir("lr");
  auto e = make_engine(c, dir);
  e.init_fresh();
  e.set_log_sink([&](const std::string& line) {
    if (line.rfind("epoch 1 ", 0) == 0) {
      auto m = e.pending_meta();
      m.learning_rate = 0.0025;
      Engine<float>::write_meta_file(dir / "meta.json", m);
    }
  });
  e.run();
  ASSERT_GE(e.history().size(), 2u);
  EXPECT_EQ(e.history()[0].learning_rate, 1e-2);
  EXPECT_EQ(e.history()[1].learning_rate, 0.0025);
  // Applied meta of the next iteration carries the edit.
  EXPECT_EQ(meta_from_json(json::parse(slurp(dir / "meta_applied_1.json"))).learning_rate, 1e-2);
  EXPECT_EQ(e.meta().learning_rate, 0.0025);
}

TEST(Engine, MalformedMetaIsIgnoredWithWarning) {
  auto c = small_config();
  c.search.max_iterations = 1;
  const auto dir = fresh_dir("malformed");
  auto e = make_engine(c, dir);
  e.init_fresh();
  auto [sub, cursor] = e.publisher()->hub().subscribe();
  bool wrote = false;
  e.set_log_sink([&](const std::string& line) {
    if (!wrote && line.rfind("epoch 1 ", 0) == 0) {
      wrote = true;
      std::ofstream(dir / "meta.json") << "{\"learning_rate\": -3, \"neurons_to_add\": 5}";
    }
  });
  e.run();
  EXPECT_EQ(e.meta().learning_rate, 1e-2);
  EXPECT_EQ(e.meta().neurons_to_add, 8u);
  bool warned = false;
  while (auto m = sub->next(std::chrono::milliseconds(1)))
    if (m->at("type") == "warning") warned = m->at("message").get<std::string>().find("learning_rate") != std::string::npos;
  EXPECT_TRUE(warned);
  const auto run = json::parse(slurp(dir / "run.json"));
  bool logged = false;
  for (const auto& l : run.at("log")) logged = logged || l.at("level") == "warning";
  EXPECT_TRUE(logged);
}

TEST(Engine, StructuralEditWaitsForIterationBoundary) {
  auto c = small_config();
  c.search.max_iterations = 2;
  const auto dir = fresh_dir("structural");
  auto e = make_engine(c, dir);
  e.init_fresh();
  bool wrote = false;
  e.set_log_sink([&](const std::string& line) {
    if (!wrote && line.rfind("epoch 1 ", 0) == 0) {
      wrote = true;
      auto m = e.pending_meta();
      m.neurons_to_add = 4;
      m.prune_count = 0;
      Engine<float>::write_meta_file(dir / "meta.json", m);
    }
  });
  e.run();
  EXPECT_EQ(e.reports()[0].at("P"), 8);
  EXPECT_EQ(e.reports()[0].at("M_requested"), 3);
  EXPECT_EQ(e.reports()[1].at("P"), 4);
  EXPECT_EQ(e.reports()[1].at("M_requested"), 0);
}

TEST(Engine, MetaStopEndsCleanlyWithCheckpoint) {
  auto c = small_config();
  c.search.max_iterations = 5;
  const auto dir = fresh_dir("stop");
  auto e = make_engine(c, dir);
  e.init_fresh();
  e.set_log_sink([&](const std::string& line) {
    if (line.rfind("epoch 2 ", 0) == 0) {
      auto m = e.pending_meta();
      m.stop = true;
      Engine<float>::write_meta_file(dir / "meta.json", m);
    }
  });
  EXPECT_EQ(e.run(), StopReason::meta_stop);
  ASSERT_EQ(e.reports().size(), 1u);
  EXPECT_FALSE(e.reports()[0].at("interrupted").get<std::string>().empty());
  EXPECT_TRUE(fs::exists(checkpoint_path(dir, 1)));
  EXPECT_EQ(e.history().size(), 2u);
  EXPECT_EQ(*e.publisher()->status(), *e.publisher()->status());
  EXPECT_FALSE(e.publisher()->status()->at("running").get<bool>());

  // Resuming clears the stop flag and carries on.
  auto r = make_engine(c, dir);
  r.resume();
  EXPECT_FALSE(r.meta().stop);
  EXPECT_EQ(r.run(2), StopReason::budget);
  EXPECT_EQ(r.reports().size(), 2u);
  EXPECT_EQ(r.history().front().epoch, 1u);
  EXPECT_EQ(r.history()[2].epoch, 3u);
}

TEST(Engine, OperatorStopIsHonouredAtEpochBoundary) {
  auto c = small_config();
  c.search.max_iterations = 5;
  auto e = make_engine(c, fresh_dir("opstop"));
  e.init_fresh();
  e.set_log_sink([&](const std::string& line) {
    if (line.rfind("epoch 1 ", 0) == 0) e.request_stop();
  });
  EXPECT_EQ(e.run(), StopReason::operator_stop);
  EXPECT_EQ(e.history().size(), 1u);
  EXPECT_EQ(e.reports().size(), 1u);
}

TEST(Engine, TargetAccuracyStopsEarly) {
  auto c = small_config();
  c.search.max_iterations = 5;
  c.search.target_train_accuracy = 0.0;
  auto e = make_engine(c, fresh_dir("target"));
  e.init_fresh();
  EXPECT_EQ(e.run(), StopReason::target_reached);
  EXPECT_EQ(e.reports().size(), 1u);
}

TEST(Engine, RejectsMismatchedNetwork) {
  auto e = make_engine(small_config(), fresh_dir("mismatch"));
  Rng rng(0);
  EXPECT_THROW(e.init_fresh(make_linear_network<float>(3, 2, LossKind::softmax_cross_entropy, rng)), ShapeError);
  EXPECT_THROW(e.run(), InvalidArgument);
}

TEST(Engine, UnwritableOutputDirectoryFailsUpFront) {
  const auto blocker = fresh_dir("blocker");
  std::ofstream(blocker) << "file";
  auto e = make_engine(small_config(), blocker / "sub");
  EXPECT_THROW(e.init_fresh(), Error);
  fs::remove(blocker);
}

TEST(Engine, ImportanceCoversEveryHiddenUnit) {
  auto e = make_engine(small_config(), fresh_dir("importance"));
  e.init_fresh();
  const auto scores = e.importance();
  EXPECT_EQ(scores.size(), total_hidden(e.network()));
  for (const auto& s : scores) EXPECT_GE(s.score, 0.0);
}

}  // namespace
}  // namespace morphnas::engine
