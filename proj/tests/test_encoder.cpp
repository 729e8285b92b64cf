#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "encoder.hpp"
#include "test_util.hpp"

using namespace loga;

namespace {

struct Fixture {
  ParamStore<float> store;
  Rng rng{99};
  Encoder<float> enc{8, 8, 1, 16, store, rng};

  std::vector<float> random_clip(long l, uint64_t seed) {
    Rng r(seed);
    std::vector<float> px(static_cast<size_t>(l) * 8 * 8);
    for (float& v : px) v = static_cast<float>(r.uniform());
    return px;
  }
};

}  // namespace

TEST_CASE("identical frames produce identical feature columns") {
  Fixture f;
  std::vector<float> frame = f.random_clip(1, 1);
  std::vector<float> clip;
  clip.insert(clip.end(), frame.begin(), frame.end());
  clip.insert(clip.end(), frame.begin(), frame.end());
  auto E = f.enc.encode_clip(clip, 2);
  REQUIRE(E->value.extent(0) == 16);
  REQUIRE(E->value.extent(1) == 2);
  for (long d = 0; d < 16; ++d) CHECK(E->value.at(d, 0) == E->value.at(d, 1));
}

TEST_CASE("permuting frames permutes columns identically") {
  Fixture f;
  long l = 4;
  std::vector<float> clip = f.random_clip(l, 2);
  long fp = 64;
  std::vector<long> perm = {2, 0, 3, 1};
  std::vector<float> permuted(clip.size());
  for (long i = 0; i < l; ++i)
    std::copy(clip.begin() + perm[i] * fp, clip.begin() + (perm[i] + 1) * fp,
              permuted.begin() + i * fp);
  auto E = f.enc.encode_clip(clip, l);
  auto Ep = f.enc.encode_clip(permuted, l);
  for (long i = 0; i < l; ++i)
    for (long d = 0; d < 16; ++d) CHECK(Ep->value.at(d, i) == E->value.at(d, perm[i]));
}

TEST_CASE("encoding is bit-identical across runs") {
  Fixture f;
  std::vector<float> clip = f.random_clip(3, 3);
  auto a = f.enc.encode_clip(clip, 3);
  auto b = f.enc.encode_clip(clip, 3);
  for (long i = 0; i < a->value.size(); ++i) CHECK(a->value[i] == b->value[i]);
}

TEST_CASE("changing frame j changes only column j") {
  Fixture f;
  long l = 5;
  std::vector<float> clip = f.random_clip(l, 4);
  auto E = f.enc.encode_clip(clip, l);
  std::vector<float> modified = clip;
  long target = 2;
  for (long i = 0; i < 64; ++i) modified[static_cast<size_t>(target * 64 + i)] =
      1.0f - modified[static_cast<size_t>(target * 64 + i)];
  auto E2 = f.enc.encode_clip(modified, l);
  bool target_changed = false;
  for (long i = 0; i < l; ++i)
    for (long d = 0; d < 16; ++d) {
      if (i == target) {
        if (E2->value.at(d, i) != E->value.at(d, i)) target_changed = true;
      } else {
        CHECK(E2->value.at(d, i) == E->value.at(d, i));
      }
    }
  CHECK(target_changed);
}

TEST_CASE("frame size must match the configuration") {
  Fixture f;
  std::vector<float> bad(static_cast<size_t>(2) * 7 * 7);
  try {
    f.enc.encode_clip(bad, 2);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::config);
  }
}

TEST_CASE("encoder rejects frames too small for its conv stack") {
  ParamStore<float> store;
  Rng rng(5);
  CHECK_THROWS_AS((Encoder<float>{4, 4, 1, 8, store, rng}), Error);
}

TEST_CASE("flatten_for_laq row-major layout") {
  ParamStore<float> store;
  Rng rng(6);
  // 8x8 is the minimum encoder size but flatten_for_laq itself has no
  // minimum; use the fixture geometry with a hand-set corner
  Fixture f;
  std::vector<float> clip(64, 0.0f);
  clip[0] = 1.0f;  // (0,0)
  clip[1] = 2.0f;  // (0,1)
  clip[8] = 3.0f;  // (1,0)
  Tensor<float> t = f.enc.flatten_for_laq(clip, 1);
  REQUIRE(t.extent(0) == 1);
  REQUIRE(t.extent(1) == 64);
  CHECK(t.at(0, 0) == 1.0f);
  CHECK(t.at(0, 1) == 2.0f);
  CHECK(t.at(0, 8) == 3.0f);
}

TEST_CASE("flatten_for_laq averages color channels") {
  ParamStore<float> store;
  Rng rng(7);
  Encoder<float> enc3(8, 8, 3, 16, store, rng);
  std::vector<float> clip(3 * 64);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 64; ++i) clip[static_cast<size_t>(c * 64 + i)] = 0.25f;
  Tensor<float> t = enc3.flatten_for_laq(clip, 1);
  for (long i = 0; i < 64; ++i) CHECK(t.at(0, i) == doctest::Approx(0.25f));

  // distinct channels: row holds their mean
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 64; ++i)
      clip[static_cast<size_t>(c * 64 + i)] = static_cast<float>(c);
  t = enc3.flatten_for_laq(clip, 1);
  for (long i = 0; i < 64; ++i) CHECK(t.at(0, i) == doctest::Approx(1.0f));
}

TEST_CASE("flatten_for_laq round trip recovers channel-mean images") {
  Fixture f;
  long l = 3;
  std::vector<float> clip = f.random_clip(l, 8);
  Tensor<float> t = f.enc.flatten_for_laq(clip, l);
  // inverse reshape: row f, position y*W+x must equal the source pixel
  for (long fr = 0; fr < l; ++fr)
    for (long y = 0; y < 8; ++y)
      for (long x = 0; x < 8; ++x)
        CHECK(t.at(fr, y * 8 + x) == clip[static_cast<size_t>(fr * 64 + y * 8 + x)]);
}

TEST_CASE("feature dimension equals configured D for all inputs") {
  Fixture f;
  for (long l : {1L, 2L, 7L}) {
    auto E = f.enc.encode_clip(f.random_clip(l, 100 + static_cast<uint64_t>(l)), l);
    CHECK(E->value.extent(0) == 16);
    CHECK(E->value.extent(1) == l);
    CHECK(E->value.all_finite());
  }
}
