#pragma once

#include "tabattack/attacks/attack.hpp"

namespace tabattack::detail {

IndexMatrix cat_matrix(const EncodedRow& row);
EncodedRow row_from_flat(const AttackContext& ctx, const Matrix& flat);
EncodedRow row_from_latent(const VaeModel& vae, const Matrix& z);
Matrix encode_row(const VaeModel& vae, const EncodedRow& row);

}  // namespace tabattack::detail
