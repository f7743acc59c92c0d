#ifndef SUPERHEDGE_ERRORS_HPP
#define SUPERHEDGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace superhedge
{

/// Base of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (shape, sign, normalization).
class ValidationError : public Error
{
public:
    using Error::Error;
};

/// An exponential left the representable range.
class NumericOverflow : public Error
{
public:
    using Error::Error;
};

/// No hedge coefficient / certificate exists for the given process.
class InfeasibleError : public Error
{
public:
    using Error::Error;
};

/// Structured input could not be parsed.
class ParseError : public Error
{
public:
    using Error::Error;
};

namespace detail
{
inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw ValidationError(message);
}
} // namespace detail

} // namespace superhedge

#endif // SUPERHEDGE_ERRORS_HPP
