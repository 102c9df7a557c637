"""Session-separated realized volatility and finite-sample moment analysis.

Modules:
    market_data -- tick CSV parsing and session-calendar slicing
    sampling    -- Δ-minute grids and intraday log-returns
    rv_core     -- realized volatility, zone returns, signature curves
    moments     -- standardized returns and the finite-sample moment law
    fitting     -- kurtosis / 6th-moment decay-curve fits
    synthsim    -- synthetic market generator (Monte Carlo oracle)
    cli         -- command-line pipeline
"""

__version__ = "0.1.0"
