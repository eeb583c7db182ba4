#include "quantvar/error.hpp"
#include "quantvar/parametric.hpp"

namespace qv::parametric {

double check_loss(double u, double alpha) { return u * (alpha - (u <= 0.0 ? 1.0 : 0.0)); }

double total_check_loss(std::span<const double> realized, std::span<const double> forecasts, double alpha) {
    if (realized.size() != forecasts.size())
        throw Error(ErrorKind::kInvalidArgument, "realized and forecast series differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < realized.size(); ++i) s += check_loss(realized[i] - forecasts[i], alpha);
    return s;
}

}  // namespace qv::parametric
