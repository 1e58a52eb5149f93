#include "iqlearn/components.hpp"

namespace iqlearn {

void Components::check_provenance() const {
  if (!stage2 || stage2->data_hash != data_hash ||
      joint.data_hash != data_hash)
    throw DataError("component fits come from different datasets");
}

std::shared_ptr<const Components> fit_components(const Dataset& data,
                                                 const FitConfig& config) {
  if (config.cdf == CdfKind::HeteroScale)
    throw DataError(
        "regime estimation uses the normal-scale or empirical error CDF");
  auto parts = std::make_shared<Components>();
  parts->stage2 =
      std::make_shared<const FittedStage2>(fit_stage2(data, config.stage2));
  parts->cdf = config.cdf == CdfKind::NormalScale
                   ? ResidualCdf::normal_scale(parts->stage2->residuals)
                   : ResidualCdf::empirical(parts->stage2->residuals);
  parts->joint = fit_conditional_joint(data, *parts->stage2, config.stage1,
                                       config.joint, config.var_fit);
  parts->mc = config.mc;
  parts->data_hash = data.hash();
  parts->train_x1.reserve(static_cast<size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) parts->train_x1.push_back(data.row(i).x1);
  return parts;
}

}  // namespace iqlearn
