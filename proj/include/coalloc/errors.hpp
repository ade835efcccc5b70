#pragma once

#include <stdexcept>
#include <string>

namespace coalloc {

// Base type for every error the engine raises on purpose.  Anything else
// escaping the library is a bug.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input: bad instance files, unknown zones,
// ill-formed bids, missing prices at settlement time.
class InputError : public Error {
public:
    using Error::Error;
};

// Network structure that cannot support a PTDF: disconnected graph,
// nonpositive susceptance, singular reduced Laplacian.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Injection vectors that do not sum to zero within tolerance.
class BalanceError : public Error {
public:
    using Error::Error;
};

// Enumeration growth past a configured cap (activation vertices, oracle
// candidate grids).  Raised before materializing anything large.
class CapacityError : public Error {
public:
    using Error::Error;
};

// Numerical failure inside the LP engine after its safeguards ran out.
// Deliberately distinct from Infeasible/Unbounded, which are answers.
class SolverError : public Error {
public:
    using Error::Error;
};

} // namespace coalloc
