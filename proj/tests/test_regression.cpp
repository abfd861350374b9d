#include <doctest.h>

#include <iostream>

#include "iterrain/container.hpp"
#include "iterrain/trainer.hpp"

using namespace iterrain;

// Full default training run on the 128x128 `bumps` tile. The model is kept
// for the acceptance run, which quantizes it instead of retraining.
TEST_CASE("bumps 128 with the default configuration reaches 45 dB") {
  const DemTile tile = synth_tile(1, 128, 128, TerrainProfile::bumps);
  const TrainConfig cfg;
  const FitResult r = fit_tile(tile, cfg);
  save_model(ITERRAIN_BUMPS_MODEL, r.model, PackConfig::passthrough(64));
  std::cout << r.report.to_text();
  CHECK(r.report.psnr_db >= 45.0);
  const FidelityReport again = evaluate_model(load_model(ITERRAIN_BUMPS_MODEL), tile, cfg.sigma_smooth);
  CHECK(again.psnr_db == r.report.psnr_db);
}
