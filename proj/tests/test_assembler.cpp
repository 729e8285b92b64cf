#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "assembler.hpp"
#include "model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace loga;

namespace {

Tensor<double> randt(std::vector<long> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

struct GcqFixture {
  ParamStore<double> store;
  Rng rng{321};
  GcqParams<double> gcq = GcqParams<double>::create(6, store, rng);

  void randomize_fc() {
    for (long i = 0; i < gcq.fc_w->value.size(); ++i) gcq.fc_w->value[i] = rng.uniform(-0.5, 0.5);
    for (long i = 0; i < gcq.fc_b->value.size(); ++i) gcq.fc_b->value[i] = rng.uniform(-0.5, 0.5);
  }
  void randomize_bn_stats() {
    for (int k = 0; k < 3; ++k)
      for (long i = 0; i < 6; ++i) {
        (*gcq.bn_mean[k])[i] = rng.uniform(-0.3, 0.3);
        (*gcq.bn_var[k])[i] = rng.uniform(0.5, 1.5);
      }
  }
};

// straight-line eval-mode recomputation of the GCQ + assembling pipeline
struct GcqOracle {
  std::vector<double> q, w_global;
  Tensor<double> K, V;
  std::vector<double> p_hat, x;

  GcqOracle(const Tensor<double>& E, const std::vector<double>& p, const GcqFixture& f) {
    long d = E.extent(0), l = E.extent(1);
    auto bn_eval = [&](double v, int which, long row) {
      return f.gcq.bn_gamma[which]->value[row] * (v - (*f.gcq.bn_mean[which])[row]) /
                 std::sqrt((*f.gcq.bn_var[which])[row] + 1e-5) +
             f.gcq.bn_beta[which]->value[row];
    };
    q.assign(d, 0);
    for (long i = 0; i < d; ++i) {
      double s = 0;
      for (long k = 0; k < d; ++k) s += f.gcq.wq->value.at(i, k) * p[static_cast<size_t>(k)];
      q[static_cast<size_t>(i)] = bn_eval(s, 0, i);
    }
    K = Tensor<double>({d, l});
    V = Tensor<double>({d, l});
    for (long i = 0; i < d; ++i)
      for (long j = 0; j < l; ++j) {
        double sk = 0, sv = 0;
        for (long k = 0; k < d; ++k) {
          sk += f.gcq.wk->value.at(i, k) * E.at(k, j);
          sv += f.gcq.wv->value.at(i, k) * E.at(k, j);
        }
        K.at(i, j) = bn_eval(sk, 1, i);
        V.at(i, j) = bn_eval(sv, 2, i);
      }
    std::vector<double> logits(static_cast<size_t>(l), 0.0);
    for (long j = 0; j < l; ++j)
      for (long i = 0; i < d; ++i) logits[static_cast<size_t>(j)] += K.at(i, j) * q[static_cast<size_t>(i)];
    w_global = oracles::softmax(logits);
    p_hat.assign(d, 0);
    for (long i = 0; i < d; ++i)
      for (long j = 0; j < l; ++j) p_hat[static_cast<size_t>(i)] += V.at(i, j) * w_global[static_cast<size_t>(j)];
    x.assign(d, 0);
    for (long i = 0; i < d; ++i) {
      double s = f.gcq.fc_b->value[i];
      for (long k = 0; k < d; ++k) s += f.gcq.fc_w->value.at(i, k) * p_hat[static_cast<size_t>(k)];
      x[static_cast<size_t>(i)] = p[static_cast<size_t>(i)] + s;
    }
  }
};

}  // namespace

TEST_CASE("laq_scores: zero kernel and zero mlp bias give uniform weights") {
  ParamStore<double> store;
  Rng rng(11);
  auto laq = LaqParams<double>::create(4, 8, store, rng);
  for (long i = 0; i < laq.kernel->value.size(); ++i) laq.kernel->value[i] = 0.0;
  for (long i = 0; i < laq.mlp_b->value.size(); ++i) laq.mlp_b->value[i] = 0.0;
  auto input = constant(randt({4, 32}, rng, 0, 1));
  auto out = laq_scores(input, laq);
  for (long i = 0; i < 4; ++i) CHECK(out.w_local->value[i] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(out.part_scores->value.extent(0) == 4);  // M = 32/8
  CHECK(out.part_scores->value.extent(1) == 4);
}

TEST_CASE("laq_scores matches the hand-computed pipeline on a tiny case") {
  // L=2, spatial axis 1x4, S=2 -> M=2 parts
  ParamStore<double> store;
  Rng rng(13);
  auto laq = LaqParams<double>::create(2, 2, store, rng);
  Tensor<double> kernel({2, 2, 2}, {0.5, -0.25, 1.0, 0.0, -0.5, 0.75, 0.25, 0.125});
  Tensor<double> mlp_w({2, 2}, {1.0, -1.0, 0.5, 2.0});
  Tensor<double> mlp_b({2}, {0.1, -0.2});
  laq.kernel->value = kernel;
  laq.mlp_w->value = mlp_w;
  laq.mlp_b->value = mlp_b;
  Tensor<double> input({2, 4}, {0.2, 0.8, -0.4, 0.6, 1.0, -0.2, 0.3, 0.9});

  auto out = laq_scores(constant(input), laq);

  // oracle: conv (stride 2) -> transpose -> mean over parts -> linear -> relu -> softmax
  Tensor<double> conv = oracles::conv1d(input, kernel, 2);  // [2 x 2]
  std::vector<double> pooled(2);
  for (long fr = 0; fr < 2; ++fr) pooled[static_cast<size_t>(fr)] = (conv.at(fr, 0) + conv.at(fr, 1)) / 2.0;
  std::vector<double> z(2);
  for (long i = 0; i < 2; ++i)
    z[static_cast<size_t>(i)] =
        std::max(0.0, mlp_w.at(i, 0) * pooled[0] + mlp_w.at(i, 1) * pooled[1] + mlp_b[i]);
  std::vector<double> expect = oracles::softmax(z);

  for (long i = 0; i < 2; ++i)
    CHECK(out.w_local->value[i] == doctest::Approx(expect[static_cast<size_t>(i)]).epsilon(1e-12));
  // part_scores is the transposed conv output
  for (long m = 0; m < 2; ++m)
    for (long fr = 0; fr < 2; ++fr)
      CHECK(out.part_scores->value.at(m, fr) == doctest::Approx(conv.at(fr, m)).epsilon(1e-12));
}

TEST_CASE("laq_scores rejects spatial axis smaller than the part size") {
  ParamStore<double> store;
  Rng rng(17);
  auto laq = LaqParams<double>::create(2, 8, store, rng);
  auto input = constant(randt({2, 4}, rng));
  try {
    laq_scores(input, laq);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::config);
  }
}

TEST_CASE("laq weights always sum to 1") {
  ParamStore<double> store;
  Rng rng(19);
  auto laq = LaqParams<double>::create(5, 3, store, rng);
  for (int it = 0; it < 50; ++it) {
    auto out = laq_scores(constant(randt({5, 17}, rng, -2, 2)), laq);
    double sum = 0;
    for (long i = 0; i < 5; ++i) {
      CHECK(out.w_local->value[i] > 0.0);
      sum += out.w_local->value[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("prototype selection, mean reduction and weighted-sum oracle") {
  Rng rng(23);
  auto E = constant(randt({6, 4}, rng));

  Tensor<double> onehot({4});
  onehot[2] = 1.0;
  auto p_sel = prototype(E, constant(onehot));
  for (long d = 0; d < 6; ++d) CHECK(p_sel->value[d] == doctest::Approx(E->value.at(d, 2)));

  auto p_mean = prototype(E, constant(Tensor<double>::full({4}, 0.25)));
  for (long d = 0; d < 6; ++d) {
    double mean = (E->value.at(d, 0) + E->value.at(d, 1) + E->value.at(d, 2) + E->value.at(d, 3)) / 4;
    CHECK(p_mean->value[d] == doctest::Approx(mean).epsilon(1e-12));
  }

  Tensor<double> w = randt({4}, rng, 0, 1);
  double sum = 0;
  for (long i = 0; i < 4; ++i) sum += w[i];
  for (long i = 0; i < 4; ++i) w[i] /= sum;
  auto p = prototype(E, constant(w));
  for (long d = 0; d < 6; ++d) {
    double expect = 0;
    for (long i = 0; i < 4; ++i) expect += w[i] * E->value.at(d, i);
    CHECK(std::fabs(p->value[d] - expect) < 1e-7);
  }
}

TEST_CASE("prototype stays in the convex hull of E's columns") {
  Rng rng(29);
  ParamStore<double> store;
  auto laq = LaqParams<double>::create(4, 4, store, rng);
  for (int it = 0; it < 100; ++it) {
    auto E = constant(randt({5, 4}, rng, -3, 3));
    auto w = laq_scores(constant(randt({4, 16}, rng)), laq).w_local;
    auto p = prototype(E, w);
    for (long d = 0; d < 5; ++d) {
      double lo = 1e300, hi = -1e300;
      for (long i = 0; i < 4; ++i) {
        lo = std::min(lo, E->value.at(d, i));
        hi = std::max(hi, E->value.at(d, i));
      }
      CHECK(p->value[d] >= lo - 1e-6);
      CHECK(p->value[d] <= hi + 1e-6);
    }
  }
}

TEST_CASE("gcq_scores: identical columns give uniform weights") {
  GcqFixture f;
  Tensor<double> E({6, 5});
  Tensor<double> col = randt({6}, f.rng);
  for (long d = 0; d < 6; ++d)
    for (long j = 0; j < 5; ++j) E.at(d, j) = col[d];
  auto p = constant(randt({6, 1}, f.rng));
  for (Mode mode : {Mode::eval, Mode::train}) {
    auto w = gcq_scores(constant(E), p, f.gcq, mode);
    for (long j = 0; j < 5; ++j) CHECK(w->value[j] == doctest::Approx(0.2).epsilon(1e-9));
  }
}

TEST_CASE("gcq_scores permutation equivariance with frozen statistics") {
  GcqFixture f;
  f.randomize_bn_stats();
  Tensor<double> E = randt({6, 5}, f.rng);
  auto p = constant(randt({6, 1}, f.rng));
  auto w = gcq_scores(constant(E), p, f.gcq, Mode::eval);

  std::vector<long> perm = {3, 0, 4, 1, 2};
  Tensor<double> Ep({6, 5});
  for (long d = 0; d < 6; ++d)
    for (long j = 0; j < 5; ++j) Ep.at(d, j) = E.at(d, perm[static_cast<size_t>(j)]);
  auto wp = gcq_scores(constant(Ep), p, f.gcq, Mode::eval);
  for (long j = 0; j < 5; ++j)
    CHECK(std::fabs(wp->value[j] - w->value[perm[static_cast<size_t>(j)]]) <= 1e-7);
}

TEST_CASE("gcq_scores and assemble match the straight-line oracle in eval mode") {
  GcqFixture f;
  f.randomize_fc();
  f.randomize_bn_stats();
  for (int it = 0; it < 20; ++it) {
    Tensor<double> E = randt({6, 4}, f.rng);
    Tensor<double> wl = randt({4}, f.rng, 0.05, 1.0);
    double s = 0;
    for (long i = 0; i < 4; ++i) s += wl[i];
    for (long i = 0; i < 4; ++i) wl[i] /= s;

    std::vector<double> p_vals(6, 0.0);
    for (long d = 0; d < 6; ++d)
      for (long i = 0; i < 4; ++i) p_vals[static_cast<size_t>(d)] += E.at(d, i) * wl[i];

    auto En = constant(E);
    auto wln = constant(wl);
    auto p = prototype(En, wln);
    auto w_g = gcq_scores(En, p, f.gcq, Mode::eval);
    auto desc = assemble(En, wln, w_g, f.gcq, Mode::eval);

    GcqOracle oracle(E, p_vals, f);
    for (long j = 0; j < 4; ++j)
      CHECK(std::fabs(w_g->value[j] - oracle.w_global[static_cast<size_t>(j)]) < 1e-6);
    for (long d = 0; d < 6; ++d) {
      CHECK(std::fabs(desc.p_hat->value[d] - oracle.p_hat[static_cast<size_t>(d)]) < 1e-6);
      CHECK(std::fabs(desc.x->value[d] - oracle.x[static_cast<size_t>(d)]) < 1e-6);
    }
  }
}

TEST_CASE("assemble: zero FC leaves x equal to the prototype bit-for-bit") {
  GcqFixture f;  // fc is zero-initialized
  Tensor<double> E = randt({6, 4}, f.rng);
  Tensor<double> wl = Tensor<double>::full({4}, 0.25);
  auto En = constant(E);
  auto wln = constant(wl);
  auto w_g = gcq_scores(En, prototype(En, wln), f.gcq, Mode::eval);
  auto desc = assemble(En, wln, w_g, f.gcq, Mode::eval);
  REQUIRE(desc.x->value.size() == desc.p->value.size());
  CHECK(std::memcmp(desc.x->value.data(), desc.p->value.data(),
                    sizeof(double) * static_cast<size_t>(desc.x->value.size())) == 0);
}

TEST_CASE("assemble: one-hot global weights select a column of V") {
  GcqFixture f;
  f.randomize_fc();
  Tensor<double> E = randt({6, 4}, f.rng);
  Tensor<double> onehot({4});
  onehot[1] = 1.0;
  auto En = constant(E);
  auto desc = assemble(En, constant(Tensor<double>::full({4}, 0.25)), constant(onehot), f.gcq,
                       Mode::eval);
  // oracle V column 1
  GcqOracle oracle(E, std::vector<double>(6, 0.0), f);
  for (long d = 0; d < 6; ++d)
    CHECK(desc.p_hat->value[d] == doctest::Approx(oracle.V.at(d, 1)).epsilon(1e-9));
}

TEST_CASE("assemble_strategy covers all six strategies") {
  ModelConfig mc = test_util::tiny_model_config();
  LogaModel<double> model(mc, 77);
  Rng rng(555);

  SUBCASE("mean_pool on identical columns returns that column") {
    // a clip of identical frames has identical feature columns
    std::vector<float> frame(static_cast<size_t>(mc.height) * mc.width);
    Rng fr(8);
    for (float& v : frame) v = static_cast<float>(fr.uniform());
    std::vector<float> clip;
    for (int i = 0; i < mc.clip_len; ++i) clip.insert(clip.end(), frame.begin(), frame.end());
    auto desc = model.forward_clip(clip, Mode::eval, Strategy::mean_pool);
    auto E = model.encoder().encode_clip(clip, mc.clip_len);
    for (long d = 0; d < mc.feature_dim; ++d)
      CHECK(desc.x->value[d] == doctest::Approx(E->value.at(d, 0)).epsilon(1e-6));
  }

  SUBCASE("associative with zero FC equals laq_only bit-for-bit") {
    auto clip = test_util::random_clip_pixels(mc, rng);
    auto assoc = model.forward_clip(clip, Mode::eval, Strategy::associative);
    auto laq = model.forward_clip(clip, Mode::eval, Strategy::laq_only);
    CHECK(std::memcmp(assoc.x->value.data(), laq.x->value.data(),
                      sizeof(double) * static_cast<size_t>(assoc.x->value.size())) == 0);
  }

  SUBCASE("strategies produce pairwise distinct descriptors once FC is nonzero") {
    // zero FC collapses associative onto laq_only; perturb it as training would
    auto& store = model.store();
    auto fc_w = store.find_param("gcq.fc.w");
    auto fc_b = store.find_param("gcq.fc.b");
    for (long i = 0; i < fc_w->value.size(); ++i) fc_w->value[i] = rng.uniform(-0.5, 0.5);
    for (long i = 0; i < fc_b->value.size(); ++i) fc_b->value[i] = rng.uniform(-0.5, 0.5);

    auto clip = test_util::random_clip_pixels(mc, rng);
    std::vector<Tensor<double>> descriptors;
    for (int s = 0; s < kNumStrategies; ++s)
      descriptors.push_back(model.forward_clip(clip, Mode::eval, strategy_at(s)).x->value);
    for (size_t a = 0; a < descriptors.size(); ++a)
      for (size_t b = a + 1; b < descriptors.size(); ++b) {
        double l2 = 0;
        for (long i = 0; i < descriptors[a].size(); ++i) {
          double d = descriptors[a][i] - descriptors[b][i];
          l2 += d * d;
        }
        CHECK(l2 > 0.0);
      }
  }

  SUBCASE("unknown strategy name raises a config error") {
    CHECK_THROWS_AS(strategy_from_name("fancy"), Error);
    try {
      strategy_from_name("fancy");
    } catch (const Error& e) {
      CHECK(e.code() == ErrCode::config);
    }
  }
}

TEST_CASE("batched and per-clip forwards agree in eval mode") {
  ModelConfig mc = test_util::tiny_model_config();
  LogaModel<double> model(mc, 31);
  Rng rng(32);
  std::vector<std::vector<float>> clips;
  for (int i = 0; i < 3; ++i) clips.push_back(test_util::random_clip_pixels(mc, rng));
  std::vector<const std::vector<float>*> ptrs;
  for (auto& c : clips) ptrs.push_back(&c);
  for (int s = 0; s < kNumStrategies; ++s) {
    auto batched = model.forward_batch(ptrs, Mode::eval, strategy_at(s));
    for (size_t i = 0; i < clips.size(); ++i) {
      auto single = model.forward_clip(clips[i], Mode::eval, strategy_at(s));
      for (long d = 0; d < mc.feature_dim; ++d)
        CHECK(batched[i].x->value[d] ==
              doctest::Approx(single.x->value[d]).epsilon(1e-12));
    }
  }
}

TEST_CASE("score record format round trip") {
  std::vector<ScoreRecord> records;
  for (uint32_t clip : {5u, 9u})
    for (uint32_t fr = 0; fr < 4; ++fr) {
      ScoreRecord r;
      r.clip_id = clip;
      r.frame = fr;
      r.w_local = 0.1 + 0.01 * fr;
      r.w_global = 0.3 - 0.02 * fr;
      r.flag = (clip == 9 && fr == 2) ? FrameFlag::id_switch : FrameFlag::clean;
      records.push_back(r);
    }
  std::string text = format_score_records(records, false);
  CHECK(text.find("clip,frame,w_local,w_global,flag") == 0);
  CHECK(text.find("id_switch") != std::string::npos);
  CHECK(text.find("# clip 5") != std::string::npos);

  auto parsed = parse_score_records(text);
  REQUIRE(parsed.size() == records.size());
  for (size_t i = 0; i < parsed.size(); ++i) {
    CHECK(parsed[i].clip_id == records[i].clip_id);
    CHECK(parsed[i].frame == records[i].frame);
    CHECK(parsed[i].w_local == doctest::Approx(records[i].w_local).epsilon(1e-7));
    CHECK(parsed[i].flag == records[i].flag);
  }

  // clean rows end with an empty flag column
  CHECK(text.find("5,0,0.1,0.3,\n") != std::string::npos);

  // amplified scores are scaled by 1000
  std::string amp = format_score_records(records, true);
  auto parsed_amp = parse_score_records(amp);
  CHECK(parsed_amp[0].w_local == doctest::Approx(100.0).epsilon(1e-7));
}

TEST_CASE("end-to-end gradients flow through the assembler") {
  // gradient of a scalar head on the associative descriptor w.r.t. LAQ and
  // GCQ parameters, against central finite differences
  ModelConfig mc = test_util::tiny_model_config();
  mc.feature_dim = 6;
  mc.clip_len = 4;
  mc.num_classes = 2;
  LogaModel<double> model(mc, 41);
  Rng rng(42);
  auto clip = test_util::random_clip_pixels(mc, rng);

  Tensor<double> head = randt({6}, rng);
  auto build = [&] {
    auto desc = model.forward_clip(clip, Mode::train, Strategy::associative);
    return reduce_sum(mul(flatten(desc.x), constant(head)));
  };
  std::vector<NodePtr<double>> leaves;
  for (const char* name : {"laq.kernel", "laq.mlp.w", "laq.mlp.b", "gcq.q.w", "gcq.k.w",
                           "gcq.v.w", "gcq.fc.w", "gcq.fc.b", "gcq.bn_q.gamma", "gcq.bn_k.beta"})
    leaves.push_back(model.store().find_param(name));
  double err = oracles::fd_gradcheck(leaves, build);
  CHECK(err < 1e-6);
}
