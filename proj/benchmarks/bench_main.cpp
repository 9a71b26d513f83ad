#include <benchmark/benchmark.h>

#include <random>

#include "lim/encoder.hpp"
#include "lim/property.hpp"
#include "lim/surface.hpp"
#include "lim/synthetic.hpp"

using namespace lim;

namespace {

const PositionalEncoder& basis() {
  static const PositionalEncoder enc = PositionalEncoder::build(BasisConfig{});
  return enc;
}

Points random_points(Eigen::Index n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Points p(n, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

const Frame& room_frame() {
  static const SyntheticScene scene([] {
    SceneSpec s;
    s.kind = SceneKind::kRoom;
    s.points = 101500;
    return s;
  }());
  return scene.frames().front();
}

void BM_EncodeBatch(benchmark::State& state) {
  const Points x = random_points(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(basis().encode_batch(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeBatch)->Arg(32)->Arg(1024)->Arg(16384);

void BM_EncodeVoxel(benchmark::State& state) {
  const Points x = random_points(state.range(0));
  const Matrix y = Matrix::Random(state.range(0), state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(encode(basis(), x, y, EncodingConfig{}));
}
BENCHMARK(BM_EncodeVoxel)->Args({32, 1})->Args({32, 3})->Args({256, 3})->Args({64, 768});

void BM_DecodeBatch(benchmark::State& state) {
  const Points x = random_points(64);
  const LatentFeature f = encode(basis(), x, Matrix::Random(64, 3), EncodingConfig{});
  const Points q = random_points(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(decode_batch(basis(), f, q));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DecodeBatch)->Arg(512);

void BM_SurfaceFrame(benchmark::State& state) {
  const Frame& f = room_frame();
  for (auto _ : state) {
    LatentImplicitMap global(MapConfig{FieldKind::kSdf, 1, basis().rank(), 0.05, 0}, basis());
    integrate(global, build_local_surface_lim(f, basis(), SurfaceConfig{}));
    benchmark::DoNotOptimize(global.size());
  }
  state.SetItemsProcessed(state.iterations() * f.size());
}
BENCHMARK(BM_SurfaceFrame)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_ColorFrame(benchmark::State& state) {
  const Frame& f = room_frame();
  for (auto _ : state) {
    LatentImplicitMap global(MapConfig{FieldKind::kProperty, 3, basis().rank(), 0.02, 0}, basis());
    integrate(global, build_property_lim(f, "color", basis(), PropertyConfig{}));
    benchmark::DoNotOptimize(global.size());
  }
  state.SetItemsProcessed(state.iterations() * f.size());
}
BENCHMARK(BM_ColorFrame)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();
