#pragma once

#include <stdexcept>
#include <string>

namespace fraclab {

// Error taxonomy shared by all modules.  Each condition is its own type so
// callers (and tests) can catch precisely.

#define FRACLAB_ERROR(NAME)                                   \
  struct NAME : std::runtime_error {                          \
    explicit NAME(const std::string& what_arg)                \
        : std::runtime_error(#NAME ": " + what_arg) {}        \
  }

FRACLAB_ERROR(EmbeddingNotPSD);
FRACLAB_ERROR(GridTooLarge);
FRACLAB_ERROR(NonStationary);
FRACLAB_ERROR(NotIrreducible);
FRACLAB_ERROR(InvalidGenerator);
FRACLAB_ERROR(QuadratureFailure);
FRACLAB_ERROR(RankZero);
FRACLAB_ERROR(DegreeTooLarge);
FRACLAB_ERROR(QuadratureDivergence);
FRACLAB_ERROR(OrderingViolation);
FRACLAB_ERROR(DimensionMismatch);
FRACLAB_ERROR(GridMismatch);
FRACLAB_ERROR(HorizonTooShort);
FRACLAB_ERROR(NotCentred);
FRACLAB_ERROR(Blowup);
FRACLAB_ERROR(NoConvergence);
FRACLAB_ERROR(RegularityTooLow);
FRACLAB_ERROR(FieldVanishes);
FRACLAB_ERROR(TailDivergent);
FRACLAB_ERROR(RegimeMismatch);
FRACLAB_ERROR(GateFailed);
FRACLAB_ERROR(ConfigInvalid);

#undef FRACLAB_ERROR

}  // namespace fraclab
