#pragma once

#include <stdexcept>
#include <string>

namespace stkde {

// Coarse classification used by the command-line front end to pick an exit
// code: usage/config (2), data (3), numerical failure (4).
enum class ErrorCategory
{
  usage,
  data,
  numerical
};

class Error : public std::runtime_error
{
public:
  Error(ErrorCategory category, const std::string& what)
    : std::runtime_error(what)
    , category_(category)
  {}

  ErrorCategory category() const noexcept { return category_; }

private:
  ErrorCategory category_;
};

#define STKDE_DEFINE_ERROR(Name, Category)                                     \
  class Name : public Error                                                    \
  {                                                                            \
  public:                                                                      \
    explicit Name(const std::string& what)                                     \
      : Error(ErrorCategory::Category, what)                                   \
    {}                                                                         \
  };

STKDE_DEFINE_ERROR(ConfigError, usage)
STKDE_DEFINE_ERROR(SpecError, usage)
STKDE_DEFINE_ERROR(FormatError, data)
STKDE_DEFINE_ERROR(NoDataError, data)
STKDE_DEFINE_ERROR(OutOfDomainError, data)
STKDE_DEFINE_ERROR(LagOutOfRangeError, data)
STKDE_DEFINE_ERROR(PreconditionError, data)
STKDE_DEFINE_ERROR(EmptyTestError, data)
STKDE_DEFINE_ERROR(ModelFileError, data)
STKDE_DEFINE_ERROR(DegenerateSeriesError, numerical)
STKDE_DEFINE_ERROR(BandwidthError, numerical)

#undef STKDE_DEFINE_ERROR

} // namespace stkde
