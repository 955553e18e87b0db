"""
Output Generator Module
Writes decoding results as JSON, CSV, gnuplot TSV and Excel files.
"""

import json
from pathlib import Path

from utils import log_error, log_success


def _target(output_folder, filename):
    output_path = Path(output_folder)
    output_path.mkdir(parents=True, exist_ok=True)
    return output_path / filename


def generate_json_output(payload, output_folder, filename="results.json"):
    """
    Write a JSON document.

    File names carry no timestamp so repeated runs overwrite each other and
    identical runs produce identical files.
    """
    json_file = _target(output_folder, filename)
    with open(json_file, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    log_success("JSON output saved", file=str(json_file))
    return str(json_file)


def generate_csv_output(table, output_folder, filename):
    """Write a DataFrame as CSV with fixed float formatting."""
    csv_file = _target(output_folder, filename)
    table.to_csv(csv_file, index=False, float_format='%.6f', lineterminator='\n')
    log_success("CSV output saved", file=str(csv_file), rows=len(table))
    return str(csv_file)


def generate_tsv_output(sweep, output_folder, filename="sweep.tsv"):
    """
    Frequency-resolved accuracies for gnuplot: one band per line,
    '#'-prefixed header, columns band_lo band_hi centre accuracy sd.
    """
    tsv_file = _target(output_folder, filename)
    with open(tsv_file, 'w', encoding='utf-8') as f:
        f.write("# band_lo\tband_hi\tcentre\taccuracy\tsd\n")
        for row in sweep.itertuples(index=False):
            centre = (row.band_lo + row.band_hi) / 2.0
            f.write(f"{row.band_lo:g}\t{row.band_hi:g}\t{centre:g}\t{row.accuracy:.6f}\t{row.sd_accuracy:.6f}\n")
    log_success("TSV output saved", file=str(tsv_file), rows=len(sweep))
    return str(tsv_file)


def generate_excel_output(tables, output_folder, filename="results.xlsx"):
    """
    Generate an Excel workbook with one styled sheet per table.

    Args:
        tables: Mapping of sheet name to DataFrame.
        output_folder: Path to output folder.
        filename: Workbook file name.

    Returns:
        Path to generated Excel file or None if failed.
    """
    try:
        from openpyxl import Workbook
        from openpyxl.styles import Font, Alignment, Border, Side, PatternFill
        from openpyxl.utils import get_column_letter

        excel_file = _target(output_folder, filename)
        wb = Workbook()
        wb.remove(wb.active)

        # Styles
        header_font = Font(bold=True, color="FFFFFF")
        header_fill = PatternFill(start_color="4472C4", end_color="4472C4", fill_type="solid")
        border = Border(
            left=Side(style='thin'),
            right=Side(style='thin'),
            top=Side(style='thin'),
            bottom=Side(style='thin')
        )

        for sheet_name, table in tables.items():
            ws = wb.create_sheet(sheet_name[:31])
            for col, header in enumerate(table.columns, 1):
                cell = ws.cell(row=1, column=col, value=str(header))
                cell.font = header_font
                cell.fill = header_fill
                cell.border = border
                cell.alignment = Alignment(horizontal='center')

            for row, values in enumerate(table.itertuples(index=False), 2):
                for col, value in enumerate(values, 1):
                    if hasattr(value, 'item'):
                        value = value.item()
                    if isinstance(value, float) and value != value:
                        value = None
                    ws.cell(row=row, column=col, value=value).border = border

            for col, header in enumerate(table.columns, 1):
                ws.column_dimensions[get_column_letter(col)].width = max(12, len(str(header)) + 4)

        wb.save(excel_file)
        log_success("Excel output saved", file=str(excel_file), sheets=len(tables))
        return str(excel_file)

    except ImportError:
        log_error("openpyxl not installed, skipping Excel output")
        return None
    except Exception as e:
        log_error("Error generating Excel output", error=str(e))
        return None


def generate_outputs(payload, tables, output_folder="output_files", excel=False):
    """
    Write every result file of a decoding run.

    Args:
        payload: JSON-serializable run document.
        tables: Dictionary with 'fbcsp' and 'sweep' DataFrames.
        output_folder: Destination directory.
        excel: Also write an Excel workbook.

    Returns:
        Dictionary of output kind to file path.
    """
    output_files = {"json": generate_json_output(payload, output_folder)}

    if not tables['fbcsp'].empty:
        output_files["fbcsp_csv"] = generate_csv_output(tables['fbcsp'], output_folder, "fbcsp.csv")
    if not tables['sweep'].empty:
        output_files["sweep_csv"] = generate_csv_output(tables['sweep'], output_folder, "sweep.csv")
        output_files["sweep_tsv"] = generate_tsv_output(tables['sweep'], output_folder)

    if excel:
        sheets = {name.upper() if name == 'fbcsp' else name.capitalize(): table
                  for name, table in tables.items() if not table.empty}
        excel_file = generate_excel_output(sheets, output_folder)
        if excel_file:
            output_files["excel"] = excel_file

    return output_files
