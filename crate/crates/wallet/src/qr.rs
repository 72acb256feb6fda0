use image::{ImageFormat, Luma};
use qrcode::{EcLevel, QrCode};

/// Renders `text` as a PNG QR code at error-correction level M.
pub fn qr_png(text: &str) -> Result<Vec<u8>, String> {
    let code = QrCode::with_error_correction_level(text.as_bytes(), EcLevel::M).map_err(|e| e.to_string())?;
    let img = code.render::<Luma<u8>>().module_dimensions(4, 4).quiet_zone(true).build();
    let mut png = std::io::Cursor::new(Vec::new());
    img.write_to(&mut png, ImageFormat::Png).map_err(|e| e.to_string())?;
    Ok(png.into_inner())
}
