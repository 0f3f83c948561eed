#ifndef MF_ERRORS_HPP
#define MF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mf {

// One exception type per failure mode so callers (and tests) can catch them
// by name. All derive from Error -> std::runtime_error.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define MF_DEFINE_ERROR(NAME)                                  \
  struct NAME : Error {                                        \
    explicit NAME(const std::string& what = #NAME) : Error(what) {} \
  }

// track
MF_DEFINE_ERROR(EmptyTrack);
MF_DEFINE_ERROR(NonPositiveLength);
MF_DEFINE_ERROR(IllegalAdjacency);
MF_DEFINE_ERROR(OutOfTrack);

// sim
MF_DEFINE_ERROR(InvalidSpec);
MF_DEFINE_ERROR(Unreachable);
MF_DEFINE_ERROR(LengthMismatch);
MF_DEFINE_ERROR(EmptyInput);

// features
MF_DEFINE_ERROR(DegenerateVector);
MF_DEFINE_ERROR(SeriesTooShort);

// nn / baselines
MF_DEFINE_ERROR(ShapeMismatch);
MF_DEFINE_ERROR(EmptyDataset);
MF_DEFINE_ERROR(TooFewSamples);
MF_DEFINE_ERROR(NoTransitions);

// eval
MF_DEFINE_ERROR(ClassTooSmall);
MF_DEFINE_ERROR(InsufficientSubjects);
MF_DEFINE_ERROR(EmptyReport);

// persistence / cli
MF_DEFINE_ERROR(IoError);
MF_DEFINE_ERROR(InvalidConfig);
MF_DEFINE_ERROR(MissingData);
MF_DEFINE_ERROR(MissingCheckpoint);
MF_DEFINE_ERROR(FormatVersionMismatch);
MF_DEFINE_ERROR(CorruptFile);

#undef MF_DEFINE_ERROR

}  // namespace mf

#endif  // MF_ERRORS_HPP
