#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace metaforge {

/// Base class for all domain errors. `kind()` names the failure class so
/// callers can dispatch without string-matching the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg.empty() ? kind : kind + ": " + msg),
        kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define METAFORGE_ERROR(Name)                          \
  struct Name : Error {                                \
    explicit Name(const std::string& msg = "")         \
        : Error(#Name, msg) {}                         \
  }

METAFORGE_ERROR(EmptyStructure);
METAFORGE_ERROR(DegenerateGeometry);
METAFORGE_ERROR(NonPhysicalBase);
METAFORGE_ERROR(NotConverged);
METAFORGE_ERROR(InvalidSampleCount);
METAFORGE_ERROR(IncompressibleLimit);
METAFORGE_ERROR(ShapeMismatch);
METAFORGE_ERROR(NonScalarLoss);
METAFORGE_ERROR(NonPositiveStd);
METAFORGE_ERROR(DegenerateAngle);
METAFORGE_ERROR(EmptyDataset);
METAFORGE_ERROR(ConstantTruth);
METAFORGE_ERROR(ZeroRange);
METAFORGE_ERROR(ZeroMean);
METAFORGE_ERROR(InsufficientSamples);
METAFORGE_ERROR(DegenerateBounds);
METAFORGE_ERROR(NumericalDivergence);
METAFORGE_ERROR(InvalidArgument);
METAFORGE_ERROR(IoError);

#undef METAFORGE_ERROR

}  // namespace metaforge
