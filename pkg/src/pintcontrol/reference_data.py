"""Published iteration counts, CPU times and errors for the two benchmark problems.

Each row holds ``(gamma, N, J)`` followed by ``(Iter, CPU, E)`` for PCG-P_alpha
and then for PCG-P.  CPU times are from the original hardware and serve only
as a trend reference.
"""

from typing import NamedTuple


class PublishedRow(NamedTuple):
    gamma: float
    N: int
    J: int
    iter_palpha: int
    cpu_palpha: float
    err_palpha: float
    iter_msc: int
    cpu_msc: float
    err_msc: float


TABLE1 = (
    PublishedRow(1e-07, 200, 961, 4, 0.66, 4.43e-3, 4, 4.04, 4.43e-3),
    PublishedRow(1e-07, 200, 3969, 4, 3.06, 4.43e-3, 4, 12.36, 4.43e-3),
    PublishedRow(1e-07, 200, 16129, 4, 11.62, 4.43e-3, 4, 42.77, 4.44e-3),
    PublishedRow(1e-07, 400, 961, 4, 1.36, 1.99e-3, 4, 12.20, 1.99e-3),
    PublishedRow(1e-07, 400, 3969, 4, 5.66, 1.99e-3, 4, 41.32, 1.99e-3),
    PublishedRow(1e-07, 400, 16129, 4, 23.38, 1.99e-3, 4, 137.84, 1.99e-3),
    PublishedRow(1e-07, 800, 961, 4, 2.79, 8.29e-4, 4, 37.75, 8.29e-4),
    PublishedRow(1e-07, 800, 3969, 4, 11.35, 8.29e-4, 4, 142.26, 8.29e-4),
    PublishedRow(1e-07, 800, 16129, 4, 46.81, 8.29e-4, 4, 446.34, 8.29e-4),
    PublishedRow(1e-05, 200, 961, 6, 0.90, 2.45e-3, 6, 5.17, 2.4e-3),
    PublishedRow(1e-05, 200, 3969, 6, 3.77, 2.45e-3, 6, 15.46, 2.45e-3),
    PublishedRow(1e-05, 200, 16129, 6, 15.70, 2.45e-3, 6, 53.49, 2.45e-3),
    PublishedRow(1e-05, 400, 961, 7, 1.98, 1.22e-3, 6, 15.53, 1.22e-3),
    PublishedRow(1e-05, 400, 3969, 7, 8.81, 1.22e-3, 6, 50.17, 1.22e-3),
    PublishedRow(1e-05, 400, 16129, 7, 35.41, 1.22e-3, 6, 179.41, 1.22e-3),
    PublishedRow(1e-05, 800, 961, 7, 4.27, 6.06e-4, 6, 50.26, 6.06e-4),
    PublishedRow(1e-05, 800, 3969, 7, 17.58, 6.09e-4, 6, 172.62, 6.09e-4),
    PublishedRow(1e-05, 800, 16129, 7, 72.43, 6.09e-4, 6, 649.47, 6.09e-4),
    PublishedRow(0.001, 200, 961, 11, 1.49, 1.38e-3, 11, 9.17, 1.38e-3),
    PublishedRow(0.001, 200, 3969, 11, 6.41, 1.53e-3, 11, 26.04, 1.53e-3),
    PublishedRow(0.001, 200, 16129, 11, 26.94, 1.57e-3, 11, 95.74, 1.57e-3),
    PublishedRow(0.001, 400, 961, 12, 3.18, 5.85e-4, 10, 23.97, 5.85e-4),
    PublishedRow(0.001, 400, 3969, 11, 13.17, 7.41e-4, 11, 90.67, 7.41e-4),
    PublishedRow(0.001, 400, 16129, 11, 52.87, 7.80e-4, 11, 325.89, 7.80e-4),
    PublishedRow(0.001, 800, 961, 12, 6.75, 1.88e-4, 10, 75.18, 1.88e-4),
    PublishedRow(0.001, 800, 3969, 11, 26.09, 3.44e-4, 11, 315.21, 3.44e-4),
    PublishedRow(0.001, 800, 16129, 11, 107.39, 3.83e-4, 11, 1182.51, 3.83e-4),
    PublishedRow(0.1, 200, 961, 7, 1.01, 6.16e-4, 7, 5.90, 6.16e-4),
    PublishedRow(0.1, 200, 3969, 7, 4.28, 1.24e-4, 7, 16.91, 1.24e-4),
    PublishedRow(0.1, 200, 16129, 7, 17.92, 1.20e-4, 7, 61.84, 1.20e-4),
    PublishedRow(0.1, 400, 961, 8, 2.24, 6.43e-4, 7, 16.89, 6.43e-4),
    PublishedRow(0.1, 400, 3969, 7, 8.72, 1.41e-4, 7, 58.28, 1.41e-4),
    PublishedRow(0.1, 400, 16129, 7, 35.57, 6.07e-5, 7, 208.84, 6.07e-5),
    PublishedRow(0.1, 800, 961, 8, 4.73, 6.57e-4, 7, 52.66, 6.57e-4),
    PublishedRow(0.1, 800, 3969, 7, 17.40, 1.54e-4, 7, 201.13, 1.54e-4),
    PublishedRow(0.1, 800, 16129, 7, 72.01, 3.10e-5, 7, 756.85, 3.10e-5),
    PublishedRow(10.0, 200, 961, 4, 0.66, 6.82e-4, 4, 3.44, 6.82e-4),
    PublishedRow(10.0, 200, 3969, 4, 2.70, 1.68e-4, 4, 10.16, 1.68e-4),
    PublishedRow(10.0, 200, 16129, 4, 11.18, 1.22e-4, 4, 36.49, 1.22e-4),
    PublishedRow(10.0, 400, 961, 4, 1.33, 6.84e-4, 4, 9.87, 6.84e-4),
    PublishedRow(10.0, 400, 3969, 4, 5.50, 1.70e-4, 4, 33.78, 1.70e-4),
    PublishedRow(10.0, 400, 16129, 4, 22.33, 6.15e-5, 4, 122.00, 6.15e-5),
    PublishedRow(10.0, 800, 961, 4, 3.66, 6.85e-4, 4, 30.62, 6.85e-4),
    PublishedRow(10.0, 800, 3969, 4, 11.10, 1.71e-4, 4, 116.08, 1.71e-4),
    PublishedRow(10.0, 800, 16129, 4, 45.33, 4.25e-5, 4, 436.58, 4.25e-5),
)
TABLE2 = (
    PublishedRow(0.0001, 100, 961, 24, 1.60, 4.61e-3, 23, 8.44, 4.61e-3),
    PublishedRow(0.0001, 100, 3969, 23, 7.15, 4.63e-3, 23, 20.32, 4.63e-3),
    PublishedRow(0.0001, 100, 16129, 23, 29.50, 4.63e-3, 23, 64.71, 4.63e-3),
    PublishedRow(0.0001, 200, 961, 25, 3.59, 2.29e-3, 23, 20.11, 2.29e-3),
    PublishedRow(0.0001, 200, 3969, 24, 15.23, 2.30e-3, 23, 59.25, 2.30e-3),
    PublishedRow(0.0001, 200, 16129, 24, 60.85, 2.31e-3, 23, 206.51, 2.31e-3),
    PublishedRow(0.0001, 400, 961, 25, 7.54, 1.14e-3, 23, 62.20, 1.14e-3),
    PublishedRow(0.0001, 400, 3969, 25, 31.23, 1.15e-3, 23, 199.52, 1.15e-3),
    PublishedRow(0.0001, 400, 16129, 25, 128.73, 1.15e-3, 23, 716.28, 1.15e-3),
    PublishedRow(0.001, 100, 961, 15, 1.14, 2.72e-3, 14, 4.78, 2.72e-3),
    PublishedRow(0.001, 100, 3969, 15, 4.77, 2.90e-3, 14, 12.06, 2.90e-3),
    PublishedRow(0.001, 100, 16129, 15, 19.87, 2.95e-3, 14, 39.27, 2.95e-3),
    PublishedRow(0.001, 200, 961, 15, 2.24, 1.25e-3, 14, 12.22, 1.24e-3),
    PublishedRow(0.001, 200, 3969, 15, 9.75, 1.42e-3, 14, 36.04, 1.42e-3),
    PublishedRow(0.001, 200, 16129, 15, 39.32, 1.47e-3, 14, 124.66, 1.47e-3),
    PublishedRow(0.001, 400, 961, 15, 4.66, 5.23e-4, 14, 39.80, 5.23e-4),
    PublishedRow(0.001, 400, 3969, 15, 19.60, 6.83e-4, 14, 127.06, 6.83e-4),
    PublishedRow(0.001, 400, 16129, 15, 79.89, 7.27e-4, 14, 426.76, 7.27e-4),
    PublishedRow(0.01, 100, 961, 11, 0.77, 2.40e-4, 11, 3.75, 2.40e-4),
    PublishedRow(0.01, 100, 3969, 11, 3.60, 5.59e-4, 11, 9.50, 5.59e-4),
    PublishedRow(0.01, 100, 16129, 11, 15.00, 6.68e-4, 11, 30.80, 6.68e-4),
    PublishedRow(0.01, 200, 961, 11, 1.65, 3.35e-4, 11, 9.59, 3.35e-4),
    PublishedRow(0.01, 200, 3969, 11, 7.38, 2.09e-4, 11, 28.26, 2.09e-4),
    PublishedRow(0.01, 200, 16129, 11, 29.84, 3.14e-4, 11, 96.93, 3.14e-4),
    PublishedRow(0.01, 400, 961, 11, 3.47, 4.54e-4, 11, 28.83, 4.54e-4),
    PublishedRow(0.01, 400, 3969, 11, 14.69, 5.98e-5, 11, 91.70, 5.98e-5),
    PublishedRow(0.01, 400, 16129, 11, 59.93, 1.39e-4, 11, 330.21, 1.39e-4),
    PublishedRow(0.1, 100, 961, 7, 0.59, 5.93e-4, 8, 2.76, 5.93e-4),
    PublishedRow(0.1, 100, 3969, 7, 2.35, 2.43e-4, 8, 6.91, 2.43e-4),
    PublishedRow(0.1, 100, 16129, 7, 9.99, 2.40e-4, 8, 22.93, 2.40e-4),
    PublishedRow(0.1, 200, 961, 7, 1.11, 6.36e-4, 8, 6.82, 6.36e-4),
    PublishedRow(0.1, 200, 3969, 7, 4.88, 1.30e-4, 8, 20.69, 1.30e-4),
    PublishedRow(0.1, 200, 16129, 7, 19.80, 1.21e-4, 8, 71.53, 1.21e-4),
    PublishedRow(0.1, 400, 961, 8, 2.61, 6.56e-4, 7, 18.27, 6.56e-4),
    PublishedRow(0.1, 400, 3969, 7, 9.93, 1.50e-4, 8, 67.01, 1.50e-4),
    PublishedRow(0.1, 400, 16129, 7, 43.19, 6.09e-5, 8, 241.76, 6.09e-5),
    PublishedRow(1.0, 100, 961, 5, 0.44, 6.67e-4, 6, 2.11, 6.67e-4),
    PublishedRow(1.0, 100, 3969, 5, 1.78, 2.45e-4, 6, 5.34, 2.45e-4),
    PublishedRow(1.0, 100, 16129, 5, 7.47, 2.42e-4, 6, 17.53, 2.42e-4),
    PublishedRow(1.0, 200, 961, 5, 0.84, 6.78e-4, 6, 5.27, 6.78e-4),
    PublishedRow(1.0, 200, 3969, 5, 3.66, 1.65e-4, 6, 15.63, 1.65e-4),
    PublishedRow(1.0, 200, 16129, 5, 14.88, 1.22e-4, 6, 54.30, 1.22e-4),
    PublishedRow(1.0, 400, 961, 5, 1.78, 6.82e-4, 5, 13.38, 6.82e-4),
    PublishedRow(1.0, 400, 3969, 5, 7.34, 1.68e-4, 6, 50.78, 1.68e-4),
    PublishedRow(1.0, 400, 16129, 5, 30.16, 6.14e-5, 6, 182.79, 6.14e-5),
)

TABLES = {1: TABLE1, 2: TABLE2}
