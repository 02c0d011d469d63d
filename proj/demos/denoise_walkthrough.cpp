// Library walkthrough without the CLI: build a miniature network, overfit
// it briefly to one noisy patch, then compare plain and self-ensembled
// restoration quality on the same patch.

#include <cstdint>
#include <iostream>

#include "mdrn/distill.hpp"
#include "mdrn/infer.hpp"
#include "mdrn/metrics.hpp"
#include "mdrn/model.hpp"
#include "mdrn/noise.hpp"
#include "mdrn/optimizer.hpp"
#include "mdrn/synthetic.hpp"

int main() {
    mdrn::ModelConfig cfg;
    cfg.in_channels = 1;
    cfg.channels = 8;
    cfg.num_msabs = 1;
    cfg.levels = 2;
    cfg.tap_indices = {1, 2};
    mdrn::Network<double> net(cfg, 7);
    std::cout << "parameters: " << net.count_parameters() << "\n";

    // Four fixed training patches stacked into one batch, one held out.
    const mdrn::NoiseSpec spec{25.0};
    auto rng = mdrn::RngStream::derive(99, {mdrn::RngStream::hash_label("walkthrough")});
    mdrn::Tensor<double> clean(4, 1, 32, 32);
    for (std::int64_t b = 0; b < 4; ++b) {
        const auto img = mdrn::synthetic_natural_image(32, 32, 200 + static_cast<std::uint64_t>(b));
        for (std::int64_t y = 0; y < 32; ++y)
            for (std::int64_t x = 0; x < 32; ++x) clean.at(b, 0, y, x) = img.at(0, 0, y, x);
    }
    const auto noisy = mdrn::add_awgn(clean, spec, rng);

    mdrn::Adam<double> adam(net.parameters());
    const mdrn::Var<double> x(noisy, false);
    const mdrn::Var<double> target(clean, false);
    for (int step = 0; step < 900; ++step) {
        const auto out = net(x);
        const auto loss = mdrn::reconstruction_loss(out, target);
        adam.zero_grad();
        loss.backward();
        adam.step(1e-3);
        if (step % 300 == 0) std::cout << "step " << step << "  loss " << loss.value().item() << "\n";
    }

    const auto held_clean = mdrn::synthetic_natural_image(32, 32, 300);
    const auto held_noisy = mdrn::add_awgn(held_clean, spec, rng);
    const auto single = mdrn::denoise_image(net, held_noisy);
    const auto ensembled = mdrn::self_ensemble_denoise(net, held_noisy);
    std::cout << "held-out noisy PSNR:     " << mdrn::format_db(mdrn::psnr(mdrn::clamp01(held_noisy), held_clean))
              << " dB\n";
    std::cout << "held-out denoised PSNR:  " << mdrn::format_db(mdrn::psnr(single, held_clean)) << " dB\n";
    std::cout << "held-out ensembled PSNR: " << mdrn::format_db(mdrn::psnr(ensembled, held_clean)) << " dB\n";
    return 0;
}
