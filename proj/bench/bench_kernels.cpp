// Serial reference vs OpenMP kernels.

#include <random>

#include <benchmark/benchmark.h>

#include "flow360/sphconv.hpp"
#include "flow360/sphere.hpp"
#include "flow360/warp.hpp"

using namespace flow360;

namespace {

FeatureMap random_features(int h, int w, int c, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    FeatureMap f(h, w, c);
    for (float& v : f.data()) v = d(rng);
    return f;
}

Kernel random_kernel(int k, int ci, int co, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> d(-1.0f, 1.0f);
    Kernel out(k, k, ci, co);
    for (float& v : out.data()) v = d(rng);
    return out;
}

Exec exec_arg(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

void BM_Conv2d(benchmark::State& state) {
    const FeatureMap x = random_features(128, 256, 8, 1);
    const Kernel k = random_kernel(3, 8, 8, 2);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, Padding::HorizontalWrap, exec_arg(state)));
}

void BM_InterleavedConv(benchmark::State& state) {
    const FeatureMap x = random_features(128, 256, 8, 3);
    std::vector<Kernel> ks;
    for (int g = 0; g < 16; ++g) ks.push_back(random_kernel(3, 8, 8, 10 + g));
    const RowGroupPlan plan = rowgroup_partition(128, 8, 3);
    for (auto _ : state)
        benchmark::DoNotOptimize(interleaved_conv(x, ks, plan, Padding::HorizontalWrap, exec_arg(state)));
}

void BM_BackwardWarp(benchmark::State& state) {
    const auto rot = SphereRotation::from_ypr_degrees(20, 15, -10);
    const Image img = sphere_texture(256, 512, 3, 4);
    const FlowField flow = rotation_flow(rot, 256, 512);
    for (auto _ : state) benchmark::DoNotOptimize(backward_warp(img, flow, exec_arg(state)));
}

void BM_RotateEquirect(benchmark::State& state) {
    const auto rot = SphereRotation::from_ypr_degrees(20, 15, -10);
    const Image img = sphere_texture(256, 512, 3, 5);
    for (auto _ : state) benchmark::DoNotOptimize(rotate_equirect(img, rot, Interp::Bilinear, exec_arg(state)));
}

void BM_ProjectOmega(benchmark::State& state) {
    const Image img = sphere_texture(256, 512, 3, 6);
    for (auto _ : state) benchmark::DoNotOptimize(project_omega(img, Interp::Bilinear, exec_arg(state)));
}

}  // namespace

BENCHMARK(BM_Conv2d)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InterleavedConv)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardWarp)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RotateEquirect)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ProjectOmega)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
