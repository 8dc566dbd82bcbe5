#pragma once

#include <stdexcept>
#include <string>

namespace zebra {

enum class ErrorCode {
    // surface validation
    DegenerateTriangle,
    UnpairedEdge,
    NonParallelGluing,
    SelfGluedEdge,
    NegativeDerivativeOnDilationSurface,
    // assembly
    ConditionDViolated,
    ConditionEViolated,
    // serialization
    SyntaxError,
    // kinematics
    RemovableVertex,
    // connectivity / covers
    NotLeafTriangulation,
    BudgetExhausted,
    NotCovered,
    NotAPolygon,
    ConnectFailed,
    // closed-trail classification
    SurfaceHasPoles,
    ClassIsPower,
    ClassTrivial,
    NotAllPiSide,
    // general
    InvalidArgument,
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}
    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

}  // namespace zebra
