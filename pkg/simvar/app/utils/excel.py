from __future__ import annotations

from pathlib import Path

import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Border, Font, PatternFill, Side
from openpyxl.utils.dataframe import dataframe_to_rows

NON_PERMISSIBLE_COLOR = "F8CBAD"


class ExcelStyler:
    """Header fill, borders, column widths and non-permissible highlighting."""

    def __init__(self, header_color: str = "D9E1F2", flag_color: str = NON_PERMISSIBLE_COLOR) -> None:
        self.header_fill = PatternFill(start_color=header_color, end_color=header_color, fill_type="solid")
        self.flag_fill = PatternFill(start_color=flag_color, end_color=flag_color, fill_type="solid")
        self.header_font = Font(bold=True, color="000000")
        self.thin_border = Border(
            left=Side(style="thin"),
            right=Side(style="thin"),
            top=Side(style="thin"),
            bottom=Side(style="thin"),
        )

    def apply(self, ws, tolerance: float | None = None) -> None:
        for cell in ws[1]:
            cell.fill = self.header_fill
            cell.font = self.header_font
            cell.border = self.thin_border

        for row in ws.iter_rows(min_row=2, max_row=ws.max_row, min_col=1, max_col=ws.max_column):
            for cell in row:
                cell.border = self.thin_border
                if cell.value == "non_permissible":
                    cell.fill = self.flag_fill
                elif tolerance is not None and isinstance(cell.value, float) and cell.value > tolerance:
                    cell.fill = self.flag_fill
                    cell.number_format = "0.0E+00"
                elif isinstance(cell.value, float):
                    cell.number_format = "0.0E+00"

        for column in ws.columns:
            letter = column[0].column_letter
            width = max(len(str(cell.value)) for cell in column if cell.value is not None)
            ws.column_dimensions[letter].width = min(width, 40) + 2


def write_styled_excel(
    df: pd.DataFrame,
    path: Path,
    sheet_name: str = "domain",
    tolerance: float | None = None,
    styler: ExcelStyler | None = None,
) -> Path:
    """Writes a report table to XLSX; deviations above ``tolerance`` are highlighted."""
    wb = Workbook()
    ws = wb.active
    ws.title = sheet_name[:31] or "domain"

    # absent values become empty cells
    df = df.astype(object).where(df.notna(), None)
    for r_idx, row in enumerate(dataframe_to_rows(df, index=False, header=True), 1):
        for c_idx, value in enumerate(row, 1):
            ws.cell(row=r_idx, column=c_idx, value=value)

    (styler or ExcelStyler()).apply(ws, tolerance)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(path)
    return path


__all__ = ["write_styled_excel", "ExcelStyler"]
